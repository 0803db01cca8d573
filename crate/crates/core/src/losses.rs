//! Classification losses: the 0-1 error, label-smoothed cross-entropy (the
//! minimizer's upper bound), and the lower-bound perturbation objective
//! `Q_{φ,μ}` built from a margin map and a scalar lower bound `φ` of the step
//! function `I{x > 0}`.
//!
//! Every loss exists in two forms: a `*_var` builder that records onto a
//! [`Tape`] so gradients can flow back to the parameters, and a plain
//! evaluation over a logits [`Tensor`].

use std::fmt;

use crate::autodiff::{softplus, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// `log(e - 1)`: the shift that makes the log lower bound pass through the origin.
pub fn log_e_minus_one() -> f64 {
    (std::f64::consts::E - 1.0).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurrogateKind {
    /// `tanh(α x)`
    Tanh,
    /// `1 - log(1 + e^{γ - x})`, `γ = log(e - 1)`
    ShiftedLog,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::Tanh => "tanh",
            SurrogateKind::ShiftedLog => "log",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(SurrogateKind::Tanh),
            "log" | "-log" | "shifted_log" | "shifted-log" => Some(SurrogateKind::ShiftedLog),
            _ => None,
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which lower bound `φ` is active and its constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Slope of the tanh bound.
    pub alpha: f64,
    /// Log-sum-exp temperature.
    pub mu: f64,
    /// Shift used by the log bound.
    pub phi_shift: f64,
}

impl SurrogateSpec {
    pub fn tanh(alpha: f64, mu: f64) -> Self {
        SurrogateSpec {
            kind: SurrogateKind::Tanh,
            alpha,
            mu,
            phi_shift: log_e_minus_one(),
        }
    }

    pub fn shifted_log(mu: f64) -> Self {
        SurrogateSpec {
            kind: SurrogateKind::ShiftedLog,
            alpha: 1.0,
            mu,
            phi_shift: log_e_minus_one(),
        }
    }

    /// Defaults: `μ = 10, α = 0.1` for tanh and `μ = 1` for the log bound.
    pub fn default_for(kind: SurrogateKind) -> Self {
        match kind {
            SurrogateKind::Tanh => SurrogateSpec::tanh(0.1, 10.0),
            SurrogateKind::ShiftedLog => SurrogateSpec::shifted_log(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mu must be > 0, got {}",
                self.mu
            )));
        }
        if self.kind == SurrogateKind::ShiftedLog && self.phi_shift != log_e_minus_one() {
            return Err(Error::InvalidArgument(format!(
                "phi_shift must equal log(e-1), got {}",
                self.phi_shift
            )));
        }
        Ok(())
    }
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec::default_for(SurrogateKind::ShiftedLog)
    }
}

/// Scalar lower bound of the step function `I{x > 0}`.
pub fn phi(spec: &SurrogateSpec, x: f64) -> f64 {
    match spec.kind {
        SurrogateKind::Tanh => (spec.alpha * x).tanh(),
        SurrogateKind::ShiftedLog => 1.0 - softplus(spec.phi_shift - x),
    }
}

/// Records `φ` elementwise.
pub fn phi_var(tape: &mut Tape, spec: &SurrogateSpec, x: Var) -> Result<Var> {
    match spec.kind {
        SurrogateKind::Tanh => {
            let scaled = tape.scale(x, spec.alpha)?;
            tape.tanh(scaled)
        }
        SurrogateKind::ShiftedLog => {
            let neg = tape.scale(x, -1.0)?;
            let shifted = tape.add_scalar(neg, spec.phi_shift)?;
            let sp = tape.softplus(shifted)?;
            let neg_sp = tape.scale(sp, -1.0)?;
            tape.add_scalar(neg_sp, 1.0)
        }
    }
}

fn check_labels(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::Shape {
            op: "labels",
            lhs: shape.to_vec(),
            rhs: vec![labels.len()],
        });
    }
    let (n, k) = (shape[0], shape[1]);
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: k,
        });
    }
    Ok((n, k))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Per-row correctness of `argmax(logits) == label`.
pub fn correct_mask(logits: &Tensor, labels: &[usize]) -> Result<Vec<bool>> {
    check_labels(logits, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| argmax(logits.row(i)) == y)
        .collect())
}

/// Fraction of rows whose argmax differs from the label.
pub fn zero_one_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, k) = check_labels(logits, labels)?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes, got {k}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let wrong = correct_mask(logits, labels)?
        .iter()
        .filter(|c| !**c)
        .count();
    Ok(wrong as f64 / n as f64)
}

/// Per-row label-smoothed cross-entropy as an `n×1` column.
pub fn cross_entropy_rows_var(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    smoothing: f64,
) -> Result<Var> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::InvalidArgument(format!(
            "smoothing must be in [0,1), got {smoothing}"
        )));
    }
    let k = tape.value(logits).cols() as f64;
    // -Σ q_j log softmax_j = lse(z) - (1-s) z_y - (s/K) Σ_j z_j   since Σ q_j = 1
    let lse = tape.logsumexp_axis(logits, 1)?;
    let picked = tape.index_select(logits, labels)?;
    let picked = tape.scale(picked, 1.0 - smoothing)?;
    let mut rows = tape.sub(lse, picked)?;
    if smoothing > 0.0 {
        let total = tape.sum_axis(logits, 1)?;
        let total = tape.scale(total, smoothing / k)?;
        rows = tape.sub(rows, total)?;
    }
    Ok(rows)
}

pub fn cross_entropy_var(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    smoothing: f64,
) -> Result<Var> {
    let rows = cross_entropy_rows_var(tape, logits, labels, smoothing)?;
    tape.mean(rows)
}

fn eval_rows(
    logits: &Tensor,
    labels: &[usize],
    build: impl FnOnce(&mut Tape, Var) -> Result<Var>,
) -> Result<Vec<f64>> {
    check_labels(logits, labels)?;
    if !logits.all_finite() {
        return Err(Error::NonFinite { op: "logits" });
    }
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone());
    let rows = build(&mut tape, z)?;
    Ok(tape.value(rows).data().to_vec())
}

fn mean(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn cross_entropy_per_sample(
    logits: &Tensor,
    labels: &[usize],
    smoothing: f64,
) -> Result<Vec<f64>> {
    eval_rows(logits, labels, |t, z| {
        cross_entropy_rows_var(t, z, labels, smoothing)
    })
}

/// Mean label-smoothed cross-entropy.
pub fn cross_entropy_smoothed(logits: &Tensor, labels: &[usize], smoothing: f64) -> Result<f64> {
    mean(&cross_entropy_per_sample(logits, labels, smoothing)?)
}

/// `F_ij = z_ij - z_{i,y_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginMatrix {
    pub values: Tensor,
}

pub fn margin_var(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let shape = tape.value(logits).shape().to_vec();
    let picked = tape.index_select(logits, labels)?;
    let spread = tape.broadcast_to(picked, &shape)?;
    tape.sub(logits, spread)
}

pub fn margin_matrix(logits: &Tensor, labels: &[usize]) -> Result<MarginMatrix> {
    let data = eval_rows(logits, labels, |t, z| margin_var(t, z, labels))?;
    Ok(MarginMatrix {
        values: Tensor::new(logits.shape().to_vec(), data)?,
    })
}

/// Per-row `(1/μ) log Σ_j exp(μ φ(F_ij))` as an `n×1` column.
pub fn q_rows_var(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    spec: &SurrogateSpec,
) -> Result<Var> {
    spec.validate()?;
    let margins = margin_var(tape, logits, labels)?;
    let bounded = phi_var(tape, spec, margins)?;
    let tempered = tape.scale(bounded, spec.mu)?;
    let lse = tape.logsumexp_axis(tempered, 1)?;
    tape.scale(lse, 1.0 / spec.mu)
}

pub fn q_loss_var(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    spec: &SurrogateSpec,
) -> Result<Var> {
    let rows = q_rows_var(tape, logits, labels, spec)?;
    tape.mean(rows)
}

pub fn q_loss_per_sample(
    logits: &Tensor,
    labels: &[usize],
    spec: &SurrogateSpec,
) -> Result<Vec<f64>> {
    eval_rows(logits, labels, |t, z| q_rows_var(t, z, labels, spec))
}

/// The smoothed perturbation objective `Q_{φ,μ}` averaged over the batch.
pub fn q_loss(logits: &Tensor, labels: &[usize], spec: &SurrogateSpec) -> Result<f64> {
    mean(&q_loss_per_sample(logits, labels, spec)?)
}

/// `(1/n) Σ_i max_j φ(F_ij)`: the bound before log-sum-exp smoothing.
pub fn max_phi_bound(logits: &Tensor, labels: &[usize], spec: &SurrogateSpec) -> Result<f64> {
    let margins = margin_matrix(logits, labels)?;
    let m = &margins.values;
    let per_row: Vec<f64> = (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .map(|&f| phi(spec, f))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    mean(&per_row)
}

/// `(1/μ) log Σ exp(μ a_j)` in max-shifted form.
pub fn smooth_max(values: &[f64], mu: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|&a| (mu * (a - m)).exp()).sum();
    m + s.ln() / mu
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptionChoice {
    A,
    B,
}

impl fmt::Display for OptionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionChoice::A => "A",
            OptionChoice::B => "B",
        })
    }
}

/// Losses of the two candidate logit vectors in the upper-vs-lower bound example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterexampleReport {
    pub classes: usize,
    pub delta: f64,
    pub ce_a: f64,
    pub ce_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub ce_prefers: OptionChoice,
    pub phi_prefers: OptionChoice,
}

/// Compares cross-entropy and a tanh margin bound on
/// A = `(1/K + δ, 1/K - δ, 1/K, …)` and B = `(0.5 - δ, 0.5 + δ, 0, …)`,
/// true class 0.
///
/// Cross-entropy reads the vectors as probabilities (`-log p_0`). The margin
/// bound reads them as logits and takes `max_{j≠0} tanh(z_j - z_0)`, so option
/// A scores `tanh(-δ)` rather than exactly zero.
pub fn counterexample_eval(classes: usize, delta: f64) -> Result<CounterexampleReport> {
    if classes < 3 {
        return Err(Error::InvalidArgument(format!(
            "K must be >= 3, got {classes}"
        )));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "delta must be in (0, 0.5), got {delta}"
        )));
    }
    let k = classes as f64;
    let mut option_a = vec![1.0 / k; classes];
    option_a[0] += delta;
    option_a[1] -= delta;
    let mut option_b = vec![0.0; classes];
    option_b[0] = 0.5 - delta;
    option_b[1] = 0.5 + delta;

    let ce = |z: &[f64]| -z[0].ln();
    let margin = |z: &[f64]| {
        z[1..]
            .iter()
            .map(|&zj| (zj - z[0]).tanh())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (ce_a, ce_b) = (ce(&option_a), ce(&option_b));
    let (phi_a, phi_b) = (margin(&option_a), margin(&option_b));
    Ok(CounterexampleReport {
        classes,
        delta,
        ce_a,
        ce_b,
        phi_a,
        phi_b,
        ce_prefers: if ce_a > ce_b {
            OptionChoice::A
        } else {
            OptionChoice::B
        },
        phi_prefers: if phi_b > phi_a {
            OptionChoice::B
        } else {
            OptionChoice::A
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_one_examples() {
        assert_eq!(
            zero_one_loss(&m(&[vec![2., 1.], vec![0., 3.]]), &[0, 1]).unwrap(),
            0.0
        );
        assert_eq!(zero_one_loss(&m(&[vec![1., 2.]]), &[0]).unwrap(), 1.0);
    }

    #[test]
    fn zero_one_tie_counts_correct_only_for_lowest_index() {
        let z = m(&[vec![1., 1.], vec![1., 1.]]);
        assert_eq!(zero_one_loss(&z, &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn zero_one_rejects_single_class() {
        assert!(zero_one_loss(&m(&[vec![1.]]), &[0]).is_err());
    }

    #[test]
    fn uniform_logits_cross_entropy_is_log_two() {
        let v = cross_entropy_smoothed(&m(&[vec![0., 0.]]), &[0], 0.0).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_matches_closed_form_probability() {
        // softmax = (0.11, 0.89, ...) with K = 2
        let c = 3.7;
        let z = m(&[vec![0.11f64.ln() - c, 0.89f64.ln() - c]]);
        let v = cross_entropy_smoothed(&z, &[0], 0.0).unwrap();
        assert!((v - (-(0.11f64).ln())).abs() < 1e-12);
        assert!((v - 2.2073).abs() < 1e-4);
    }

    #[test]
    fn smoothing_mixes_uniform_target() {
        let z = m(&[vec![1.0, -0.5, 2.0]]);
        let s = 0.1;
        let p: Vec<f64> = {
            let e: Vec<f64> = z.row(0).iter().map(|v| v.exp()).collect();
            let tot: f64 = e.iter().sum();
            e.iter().map(|v| v / tot).collect()
        };
        let q = [1.0 - s + s / 3.0, s / 3.0, s / 3.0];
        let want: f64 = -q.iter().zip(&p).map(|(q, p)| q * p.ln()).sum::<f64>();
        let got = cross_entropy_smoothed(&z, &[0], s).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!(cross_entropy_smoothed(&z, &[0], 1.0).is_err());
    }

    #[test]
    fn phi_examples() {
        let log = SurrogateSpec::shifted_log(1.0);
        assert_eq!(phi(&log, 0.0), 0.0);
        let t = SurrogateSpec::tanh(0.1, 10.0);
        assert!((phi(&t, 2.0) - 0.197_375_320_224_904).abs() < 1e-12);
    }

    #[test]
    fn phi_is_below_step_on_grid() {
        for spec in [
            SurrogateSpec::shifted_log(1.0),
            SurrogateSpec::tanh(0.1, 10.0),
            SurrogateSpec::tanh(5.0, 1.0),
        ] {
            for i in 0..=40_000 {
                let x = -20.0 + i as f64 * 1e-3;
                let step = if x > 0.0 { 1.0 } else { 0.0 };
                assert!(phi(&spec, x) <= step, "{:?} at {x}", spec.kind);
            }
        }
    }

    #[test]
    fn margin_examples() {
        let f = margin_matrix(&m(&[vec![3., 1., 2.]]), &[0]).unwrap();
        assert_eq!(f.values.data(), &[0., -2., -1.]);
        let f = margin_matrix(&m(&[vec![4., 4., 4.]]), &[1]).unwrap();
        assert_eq!(f.values.data(), &[0., 0., 0.]);
    }

    #[test]
    fn q_loss_two_equal_logits_is_log_two() {
        let z = m(&[vec![0.3, 0.3]]);
        let v = q_loss(&z, &[1], &SurrogateSpec::shifted_log(1.0)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn q_loss_rejects_nonfinite_input() {
        let z = m(&[vec![f64::NAN, 0.3]]);
        assert!(q_loss(&z, &[1], &SurrogateSpec::default()).is_err());
    }

    #[test]
    fn counterexample_reference_values() {
        let r = counterexample_eval(10, 0.01).unwrap();
        assert!((r.ce_a - 2.2073).abs() < 1e-4);
        assert!((r.ce_b - 0.7133).abs() < 1e-4);
        assert!((r.phi_a + 0.0100).abs() < 1e-4);
        assert!((r.phi_b - 0.0200).abs() < 1e-4);
        assert_eq!(r.ce_prefers, OptionChoice::A);
        assert_eq!(r.phi_prefers, OptionChoice::B);
    }

    #[test]
    fn counterexample_option_a_vanishes_with_delta() {
        let r = counterexample_eval(10, 1e-9).unwrap();
        assert!(r.phi_a.abs() < 1e-8);
    }

    #[test]
    fn counterexample_range_checks() {
        assert!(counterexample_eval(2, 0.01).is_err());
        assert!(counterexample_eval(10, 0.5).is_err());
        assert!(counterexample_eval(10, 0.0).is_err());
        assert!(counterexample_eval(3, 0.49).is_ok());
    }

    #[test]
    fn spec_validation() {
        assert!(SurrogateSpec::tanh(0.0, 1.0).validate().is_err());
        assert!(SurrogateSpec::shifted_log(-1.0).validate().is_err());
        let mut s = SurrogateSpec::shifted_log(1.0);
        s.phi_shift = 0.5;
        assert!(s.validate().is_err());
    }
}
