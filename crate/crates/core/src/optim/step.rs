use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::perturb::{
    adaptive_perturbation, perturbation, sds_select, swp_mask, AscentLoss, PerturbConfig,
    PerturbFamily,
};
use super::sgd::{Schedule, SgdState};
use crate::autodiff::Tensor;
use crate::data::{Batch, SplitRole};
use crate::error::{Error, Result};
use crate::losses::{
    correct_mask, cross_entropy_per_sample, cross_entropy_smoothed, q_loss_per_sample,
};
use crate::model::{MlpModel, Objective, ParameterVector};

/// What happened in one optimizer step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub eta: f64,
    pub batch_size: usize,
    /// Smoothed cross-entropy at the unperturbed weights.
    pub train_ce: f64,
    /// Value of the ascent objective at the unperturbed weights.
    pub ascent_loss: f64,
    /// Cross-entropy at `w + ε` on the samples used for descent.
    pub descent_loss: f64,
    pub eps_norm: f64,
    pub degenerate: bool,
    /// Samples correct at `w` that turn wrong at `w + ε`.
    pub flipped: usize,
    pub correct_before: usize,
    /// Samples used for the descent gradient.
    pub selected: usize,
    /// Gradient that was fed to SGD.
    pub descent_grad: ParameterVector,
    pub eps: ParameterVector,
}

/// Owns the optimizer state for one run: perturbation settings, SGD
/// momentum, schedule, and the RNG stream used for weight-perturbation masks.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub cfg: PerturbConfig,
    pub sgd: SgdState,
    pub schedule: Schedule,
    pub label_smoothing: f64,
    rng: ChaCha8Rng,
}

fn count_flips(before: &[bool], after: &[bool]) -> usize {
    before
        .iter()
        .zip(after)
        .filter(|(b, a)| **b && !**a)
        .count()
}

impl Trainer {
    pub fn new(
        cfg: PerturbConfig,
        sgd: SgdState,
        schedule: Schedule,
        label_smoothing: f64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Trainer {
            cfg,
            sgd,
            schedule,
            label_smoothing,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn ce(&self) -> Objective {
        Objective::CrossEntropy {
            smoothing: self.label_smoothing,
        }
    }

    fn ascent_objective(&self) -> Objective {
        match (self.cfg.family, self.cfg.ascent_loss) {
            (PerturbFamily::BiSam, AscentLoss::Surrogate) => {
                Objective::Surrogate(self.cfg.surrogate)
            }
            _ => self.ce(),
        }
    }

    fn per_sample(
        &self,
        objective: &Objective,
        logits: &Tensor,
        labels: &[usize],
    ) -> Result<Vec<f64>> {
        match objective {
            Objective::CrossEntropy { smoothing } => {
                cross_entropy_per_sample(logits, labels, *smoothing)
            }
            Objective::Surrogate(spec) => q_loss_per_sample(logits, labels, spec),
        }
    }

    /// Dispatches on the configured family.
    pub fn step(&mut self, model: &mut MlpModel, batch: &Batch) -> Result<StepReport> {
        match self.cfg.family {
            PerturbFamily::None => self.sgd_step(model, batch),
            PerturbFamily::Sam => self.sam_step(model, batch),
            PerturbFamily::BiSam => self.bisam_step(model, batch),
        }
    }

    fn guard(batch: &Batch) -> Result<()> {
        if batch.role != SplitRole::Train {
            return Err(Error::SplitLeak(batch.role.name()));
        }
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        Ok(())
    }

    pub fn sgd_step(&mut self, model: &mut MlpModel, batch: &Batch) -> Result<StepReport> {
        Self::guard(batch)?;
        let step = self.sgd.step_count;
        let eta = self.schedule.eta(step)?;
        let eval = model.evaluate(&batch.inputs, &batch.labels, &self.ce())?;
        let correct = correct_mask(&eval.logits, &batch.labels)?;
        self.sgd.apply(model, &eval.grad, eta)?;
        Ok(StepReport {
            step,
            eta,
            batch_size: batch.len(),
            train_ce: eval.loss,
            ascent_loss: eval.loss,
            descent_loss: eval.loss,
            eps_norm: 0.0,
            degenerate: false,
            flipped: 0,
            correct_before: correct.iter().filter(|c| **c).count(),
            selected: batch.len(),
            eps: ParameterVector::zeros(eval.grad.len()),
            descent_grad: eval.grad,
        })
    }

    /// Ascent and descent on the smoothed cross-entropy.
    pub fn sam_step(&mut self, model: &mut MlpModel, batch: &Batch) -> Result<StepReport> {
        self.perturbed_step(model, batch, self.ce())
    }

    /// Ascent on `Q_{φ,μ}` (or cross-entropy in diagnostic mode), descent on
    /// the smoothed cross-entropy. Honors the adaptive, SWP and SDS settings.
    pub fn bisam_step(&mut self, model: &mut MlpModel, batch: &Batch) -> Result<StepReport> {
        let objective = self.ascent_objective();
        self.perturbed_step(model, batch, objective)
    }

    fn perturbed_step(
        &mut self,
        model: &mut MlpModel,
        batch: &Batch,
        ascent: Objective,
    ) -> Result<StepReport> {
        Self::guard(batch)?;
        let step = self.sgd.step_count;
        let eta = self.schedule.eta(step)?;
        let cfg = &self.cfg;

        let w0 = model.params();
        let asc = model.evaluate(&batch.inputs, &batch.labels, &ascent)?;
        let train_ce = match ascent {
            Objective::CrossEntropy { .. } => asc.loss,
            Objective::Surrogate(_) => {
                cross_entropy_smoothed(&asc.logits, &batch.labels, self.label_smoothing)?
            }
        };

        let mut p = if cfg.adaptive {
            adaptive_perturbation(&w0, &asc.grad, cfg.rho, cfg.grad_norm_floor)?
        } else {
            perturbation(&asc.grad, cfg.rho, cfg.grad_norm_floor)?
        };
        if let Some(beta) = cfg.swp_beta {
            let mask = swp_mask(p.eps.len(), beta, cfg.swp_semantics, &mut self.rng);
            for (e, m) in p.eps.iter_mut().zip(&mask) {
                *e *= m;
            }
        }
        let eps_norm = p.eps.norm();

        model.add_to_params(&p.eps)?;
        let outcome = (|| {
            // A zero perturbation carries no sharpness signal, so data
            // selection is skipped and the whole batch is used.
            let sds = cfg.sds_ratio.filter(|_| !p.eps.is_zero());
            let (logits_perturbed, selected, desc) = match sds {
                Some(ratio) => {
                    let logits = model.logits(&batch.inputs)?;
                    let after = self.per_sample(&ascent, &logits, &batch.labels)?;
                    let before = self.per_sample(&ascent, &asc.logits, &batch.labels)?;
                    let gains: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
                    let keep = sds_select(&gains, ratio)?;
                    let sub = batch.select(&keep);
                    let desc = model.evaluate(&sub.inputs, &sub.labels, &self.ce())?;
                    (logits, keep.len(), desc)
                }
                None => {
                    let desc = model.evaluate(&batch.inputs, &batch.labels, &self.ce())?;
                    (desc.logits.clone(), batch.len(), desc)
                }
            };
            Ok::<_, Error>((logits_perturbed, selected, desc))
        })();
        model.set_params(&w0)?;
        let (logits_perturbed, selected, desc) = outcome?;

        let before = correct_mask(&asc.logits, &batch.labels)?;
        let after = correct_mask(&logits_perturbed, &batch.labels)?;
        self.sgd.apply(model, &desc.grad, eta)?;

        Ok(StepReport {
            step,
            eta,
            batch_size: batch.len(),
            train_ce,
            ascent_loss: asc.loss,
            descent_loss: desc.loss,
            eps_norm,
            degenerate: p.degenerate,
            flipped: count_flips(&before, &after),
            correct_before: before.iter().filter(|c| **c).count(),
            selected,
            descent_grad: desc.grad,
            eps: p.eps,
        })
    }
}
