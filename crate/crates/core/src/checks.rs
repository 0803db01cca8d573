//! Self-contained numerical verification suites: finite-difference gradient
//! checks and the inequalities the surrogate loss relies on.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::Result;
use crate::losses::{phi, q_loss, smooth_max, zero_one_loss, SurrogateSpec};
use crate::model::{MlpModel, MlpSpec, Objective};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const BOUND_TOLERANCE: f64 = 1e-10;
/// Minimum distance of every hidden pre-activation from the ReLU kink in
/// gradient-check cases; far above the largest shift a step of `FD_STEP` causes.
pub const KINK_CLEARANCE: f64 = 1e-3;
pub const MU_SWEEP: [f64; 3] = [0.1, 1.0, 10.0];

/// Outcome of one named suite. `worst_margin` is the smallest slack seen;
/// negative beyond the tolerance means a violation, shown in `counterexample`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub worst_margin: f64,
    pub passed: bool,
    pub counterexample: Option<String>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} cases={:<7} worst_margin={:+.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst_margin
        )?;
        if let Some(c) = &self.counterexample {
            write!(f, "\n     counterexample: {c}")?;
        }
        Ok(())
    }
}

struct Tracker {
    name: String,
    cases: usize,
    worst: f64,
    worst_input: String,
    tolerance: f64,
}

impl Tracker {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Tracker {
            name: name.into(),
            cases: 0,
            worst: f64::INFINITY,
            worst_input: String::new(),
            tolerance,
        }
    }

    fn record(&mut self, margin: f64, input: impl FnOnce() -> String) {
        self.cases += 1;
        if margin < self.worst || margin.is_nan() {
            self.worst = margin;
            self.worst_input = input();
        }
    }

    fn finish(self) -> CheckReport {
        let passed = self.worst >= -self.tolerance;
        CheckReport {
            name: self.name,
            cases: self.cases,
            worst_margin: self.worst,
            passed,
            counterexample: (!passed).then_some(self.worst_input),
        }
    }
}

fn random_logits<R: Rng>(rng: &mut R, n: usize, k: usize, scale: f64) -> Tensor {
    let data = (0..n * k).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::matrix(n, k, data).expect("shape matches data")
}

fn random_labels<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

fn surrogates(mu: f64) -> [SurrogateSpec; 2] {
    [SurrogateSpec::tanh(0.1, mu), SurrogateSpec::shifted_log(mu)]
}

/// Central-difference gradient of `objective` at the model's weights.
pub fn finite_difference_grad(
    model: &MlpModel,
    inputs: &Tensor,
    labels: &[usize],
    objective: &Objective,
    h: f64,
) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let base = model.params();
    let mut w = base.0.clone();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        w[i] = base[i] + h;
        probe.set_params(&w)?;
        let up = probe.evaluate(inputs, labels, objective)?.loss;
        w[i] = base[i] - h;
        probe.set_params(&w)?;
        let down = probe.evaluate(inputs, labels, objective)?.loss;
        w[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Smallest `|pre-activation|` over all hidden ReLU units and samples.
/// Central differences straddle the kink when this is within a step of 0.
pub fn min_hidden_preactivation(model: &MlpModel, inputs: &Tensor) -> f64 {
    let widths = model.spec().widths();
    let params = model.params();
    let mut offset = 0;
    let mut h: Vec<Vec<f64>> = (0..inputs.rows()).map(|i| inputs.row(i).to_vec()).collect();
    let mut closest = f64::INFINITY;
    for (layer, pair) in widths.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        let w = &params[offset..offset + d_in * d_out];
        let b = &params[offset + d_in * d_out..offset + d_in * d_out + d_out];
        offset += d_in * d_out + d_out;
        if layer + 2 == widths.len() {
            break;
        }
        for row in h.iter_mut() {
            let pre: Vec<f64> = (0..d_out)
                .map(|j| b[j] + (0..d_in).map(|i| row[i] * w[i * d_out + j]).sum::<f64>())
                .collect();
            closest = pre.iter().fold(closest, |m, a| m.min(a.abs()));
            *row = pre.into_iter().map(|a| a.max(0.0)).collect();
        }
    }
    closest
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both are ~0.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Compares autodiff gradients with central differences on `cases` random
/// models and batches for smoothed cross-entropy and both surrogates.
pub fn check_gradients(seed: u64, cases: usize) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        "grad: smoothed cross-entropy",
        "grad: Q tanh",
        "grad: Q log",
    ];
    let mut trackers: Vec<Tracker> = names.iter().map(|n| Tracker::new(*n, 0.0)).collect();
    for case in 0..cases {
        let spec = MlpSpec {
            input_dim: rng.gen_range(2..5),
            hidden: vec![rng.gen_range(2..6)],
            classes: rng.gen_range(2..6),
        };
        let model = MlpModel::new(spec.clone(), rng.gen())?;
        let n = rng.gen_range(1..9);
        // Central differences are meaningless across a ReLU kink, so redraw
        // any batch with a hidden unit too close to zero.
        let inputs = loop {
            let x = random_logits(&mut rng, n, spec.input_dim, 2.0);
            if min_hidden_preactivation(&model, &x) > KINK_CLEARANCE {
                break x;
            }
        };
        let labels = random_labels(&mut rng, n, spec.classes);
        let mu = MU_SWEEP[rng.gen_range(0..MU_SWEEP.len())];
        let objectives = [
            Objective::CrossEntropy {
                smoothing: rng.gen_range(0.0..0.3),
            },
            Objective::Surrogate(SurrogateSpec::tanh(rng.gen_range(0.05..2.0), mu)),
            Objective::Surrogate(SurrogateSpec::shifted_log(mu)),
        ];
        for (t, objective) in trackers.iter_mut().zip(&objectives) {
            let analytic = model.evaluate(&inputs, &labels, objective)?.grad;
            let numeric = finite_difference_grad(&model, &inputs, &labels, objective, FD_STEP)?;
            let err = relative_error(&analytic, &numeric);
            t.record(GRAD_TOLERANCE - err, || {
                format!(
                    "case {case}: {objective:?}, widths {:?}, relative error {err:.3e}",
                    spec.widths()
                )
            });
        }
    }
    Ok(trackers.into_iter().map(Tracker::finish).collect())
}

/// Inequality suites for the surrogate. `phi_offset` is added to every `φ`
/// value and exists so the suite can be shown to catch a broken bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsCheck {
    pub seed: u64,
    pub draws: usize,
    pub max_classes: usize,
    pub phi_offset: f64,
}

impl Default for BoundsCheck {
    fn default() -> Self {
        BoundsCheck {
            seed: 0,
            draws: 10_000,
            max_classes: 20,
            phi_offset: 0.0,
        }
    }
}

impl BoundsCheck {
    pub fn run(&self) -> Result<Vec<CheckReport>> {
        let mut out = vec![self.phi_grid()];
        for mu in MU_SWEEP {
            out.extend(self.zero_one_bound(mu)?);
            out.push(self.sandwich(mu));
        }
        Ok(out)
    }

    /// `φ(x) ≤ I{x > 0}` on a dense grid.
    fn phi_grid(&self) -> CheckReport {
        let mut t = Tracker::new("phi <= step on [-50, 50]", BOUND_TOLERANCE);
        for spec in surrogates(1.0) {
            for i in -50_000..=50_000 {
                let x = i as f64 * 1e-3;
                let step = if x > 0.0 { 1.0 } else { 0.0 };
                let v = phi(&spec, x) + self.phi_offset;
                t.record(step - v, || {
                    format!("{} phi({x}) = {v} > {step}", spec.kind)
                });
            }
        }
        t.finish()
    }

    /// `zero_one ≥ Q_{φ,μ} − (1/μ) log K` for single samples and batches.
    fn zero_one_bound(&self, mu: f64) -> Result<Vec<CheckReport>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ mu.to_bits());
        let mut reports = Vec::new();
        for spec in surrogates(mu) {
            let mut t = Tracker::new(
                format!("0-1 >= Q - log(K)/mu, {} mu={mu}", spec.kind),
                BOUND_TOLERANCE,
            );
            for k in 2..=self.max_classes {
                for d in 0..self.draws {
                    let n = if d % 2 == 0 { 1 } else { 4 };
                    let scale = [0.5, 5.0, 50.0][d % 3];
                    let logits = random_logits(&mut rng, n, k, scale);
                    let labels = random_labels(&mut rng, n, k);
                    let zo = zero_one_loss(&logits, &labels)?;
                    let q = q_loss(&logits, &labels, &spec)? + self.phi_offset;
                    let margin = zo - (q - (k as f64).ln() / mu);
                    t.record(margin, || {
                        format!(
                            "K={k} labels={labels:?} logits={:?} 0-1={zo} Q={q}",
                            logits.data()
                        )
                    });
                }
            }
            reports.push(t.finish());
        }
        Ok(reports)
    }

    /// `max a ≤ (1/μ) log Σ e^{μ a} ≤ max a + (1/μ) log K`.
    fn sandwich(&self, mu: f64) -> CheckReport {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ mu.to_bits() ^ 0x5a5a);
        let mut t = Tracker::new(format!("log-sum-exp sandwich mu={mu}"), BOUND_TOLERANCE);
        for k in 2..=self.max_classes {
            for d in 0..self.draws {
                let scale = [0.5, 5.0, 500.0][d % 3];
                let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-scale..scale)).collect();
                let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s = smooth_max(&a, mu);
                let margin = (s - m).min(m + (k as f64).ln() / mu - s);
                t.record(margin, || format!("a={a:?} smooth_max={s} max={m}"));
            }
        }
        t.finish()
    }
}

pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.passed)
}
