use rand::Rng;

use crate::error::{Error, Result};
use crate::losses::SurrogateSpec;
use crate::model::ParameterVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbFamily {
    /// Plain SGD, no ascent step.
    None,
    /// Ascent and descent on the same cross-entropy.
    Sam,
    /// Ascent on the lower-bound objective `Q_{φ,μ}`, descent on cross-entropy.
    BiSam,
}

impl PerturbFamily {
    pub fn name(self) -> &'static str {
        match self {
            PerturbFamily::None => "sgd",
            PerturbFamily::Sam => "sam",
            PerturbFamily::BiSam => "bisam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" | "sgd" => Some(PerturbFamily::None),
            "sam" => Some(PerturbFamily::Sam),
            "bisam" => Some(PerturbFamily::BiSam),
            _ => None,
        }
    }
}

/// How stochastic weight perturbation picks coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwpSemantics {
    /// A coordinate is kept with probability `β` and scaled by `1/(1-β)`.
    Select,
    /// A coordinate is kept with probability `1-β` and scaled by `1/(1-β)`,
    /// which makes `E[mask ∘ g] = g`.
    KeepProb,
}

impl SwpSemantics {
    pub fn name(self) -> &'static str {
        match self {
            SwpSemantics::Select => "select",
            SwpSemantics::KeepProb => "keep-prob",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "select" | "literal" => Some(SwpSemantics::Select),
            "keep-prob" | "keep_prob" | "keep" => Some(SwpSemantics::KeepProb),
            _ => None,
        }
    }
}

/// Objective the ascent step differentiates for the BiSAM family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AscentLoss {
    Surrogate,
    /// Diagnostic: use the minimizer's cross-entropy, reproducing SAM.
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbConfig {
    pub family: PerturbFamily,
    pub rho: f64,
    pub adaptive: bool,
    pub swp_beta: Option<f64>,
    pub swp_semantics: SwpSemantics,
    pub sds_ratio: Option<f64>,
    pub surrogate: SurrogateSpec,
    pub ascent_loss: AscentLoss,
    pub grad_norm_floor: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            family: PerturbFamily::BiSam,
            rho: 0.05,
            adaptive: false,
            swp_beta: None,
            swp_semantics: SwpSemantics::Select,
            sds_ratio: None,
            surrogate: SurrogateSpec::default(),
            ascent_loss: AscentLoss::Surrogate,
            grad_norm_floor: 1e-12,
        }
    }
}

impl PerturbConfig {
    pub fn sgd() -> Self {
        PerturbConfig {
            family: PerturbFamily::None,
            ..Default::default()
        }
    }

    pub fn sam(rho: f64) -> Self {
        PerturbConfig {
            family: PerturbFamily::Sam,
            rho,
            ..Default::default()
        }
    }

    pub fn bisam(rho: f64, surrogate: SurrogateSpec) -> Self {
        PerturbConfig {
            family: PerturbFamily::BiSam,
            rho,
            surrogate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be >= 0, got {}", self.rho));
        }
        if !(self.grad_norm_floor > 0.0) {
            return bad(format!(
                "grad_norm_floor must be > 0, got {}",
                self.grad_norm_floor
            ));
        }
        if let Some(b) = self.swp_beta {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("swp_beta must be in [0,1), got {b}"));
            }
        }
        if let Some(r) = self.sds_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("sds_ratio must be in (0,1], got {r}"));
            }
        }
        if self.family == PerturbFamily::BiSam {
            self.surrogate.validate()?;
        }
        Ok(())
    }

    /// Settings that are legal but almost certainly unintended.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.family != PerturbFamily::None
            && self.swp_beta == Some(0.0)
            && self.swp_semantics == SwpSemantics::Select
        {
            out.push("swp_beta = 0 under select semantics keeps no coordinates; perturbation is always zero".into());
        }
        out
    }
}

/// A perturbation and whether the gradient was too small to normalize.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub eps: ParameterVector,
    pub degenerate: bool,
}

fn check_finite(grad: &[f64]) -> Result<()> {
    if grad.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op: "perturbation" })
    }
}

/// `ε = ρ g / ‖g‖₂` over all parameters at once; zero when `‖g‖₂ < floor`.
pub fn perturbation(grad: &[f64], rho: f64, floor: f64) -> Result<Perturbation> {
    check_finite(grad)?;
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm < floor {
        return Ok(Perturbation {
            eps: ParameterVector::zeros(grad.len()),
            degenerate: true,
        });
    }
    let c = rho / norm;
    Ok(Perturbation {
        eps: ParameterVector(grad.iter().map(|g| c * g).collect()),
        degenerate: false,
    })
}

/// `ε = ρ T² g / ‖T g‖₂` with `T = diag(|w|)`.
pub fn adaptive_perturbation(
    weights: &[f64],
    grad: &[f64],
    rho: f64,
    floor: f64,
) -> Result<Perturbation> {
    check_finite(grad)?;
    if weights.len() != grad.len() {
        return Err(Error::Shape {
            op: "adaptive_perturbation",
            lhs: vec![weights.len()],
            rhs: vec![grad.len()],
        });
    }
    let norm = weights
        .iter()
        .zip(grad)
        .map(|(w, g)| (w.abs() * g).powi(2))
        .sum::<f64>()
        .sqrt();
    if norm < floor {
        return Ok(Perturbation {
            eps: ParameterVector::zeros(grad.len()),
            degenerate: true,
        });
    }
    let c = rho / norm;
    Ok(Perturbation {
        eps: ParameterVector(
            weights
                .iter()
                .zip(grad)
                .map(|(w, g)| c * (w * w) * g)
                .collect(),
        ),
        degenerate: false,
    })
}

/// Per-coordinate scale for stochastic weight perturbation: `1/(1-β)` for
/// kept coordinates, `0` otherwise, drawn independently per coordinate.
pub fn swp_mask<R: Rng + ?Sized>(
    dim: usize,
    beta: f64,
    semantics: SwpSemantics,
    rng: &mut R,
) -> Vec<f64> {
    let keep_prob = match semantics {
        SwpSemantics::Select => beta,
        SwpSemantics::KeepProb => 1.0 - beta,
    };
    let scale = 1.0 / (1.0 - beta);
    (0..dim)
        .map(|_| {
            if rng.gen::<f64>() < keep_prob {
                scale
            } else {
                0.0
            }
        })
        .collect()
}

/// Indices of the `⌈γ n⌉` samples with the largest gain, ties to the lower
/// index, returned in ascending order.
pub fn sds_select(gains: &[f64], ratio: f64) -> Result<Vec<usize>> {
    if gains.is_empty() {
        return Err(Error::InvalidArgument(
            "sds_select on an empty batch".into(),
        ));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sds_ratio must be in (0,1], got {ratio}"
        )));
    }
    let n = gains.len();
    // guard against ratio*n landing a hair above an integer
    let count = ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut picked = order[..count].to_vec();
    picked.sort_unstable();
    Ok(picked)
}
