//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain function that is also tested
//! natively.

use sharplab::autodiff::Tensor;
use sharplab::config::RunConfig;
use sharplab::harness::{apply_family, model_spec, prepare_data, train};
use sharplab::losses::{counterexample_eval, phi, SurrogateKind, SurrogateSpec};
use sharplab::model::MlpModel;
use wasm_bindgen::prelude::*;

/// Half-width of the square the decision map covers.
pub const VIEW_RADIUS: f64 = 2.0;

/// `n` samples of the chosen lower bound on `[lo, hi]`.
pub fn phi_samples(
    kind: &str,
    alpha: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> sharplab::Result<Vec<f64>> {
    let spec = match SurrogateKind::parse(kind) {
        Some(SurrogateKind::Tanh) => SurrogateSpec::tanh(alpha, 1.0),
        Some(SurrogateKind::ShiftedLog) => SurrogateSpec::shifted_log(1.0),
        None => {
            return Err(sharplab::Error::InvalidArgument(format!(
                "unknown bound `{kind}`"
            )))
        }
    };
    spec.validate()?;
    if n < 2 || !(hi > lo) {
        return Err(sharplab::Error::InvalidArgument(
            "need n >= 2 and hi > lo".into(),
        ));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| phi(&spec, lo + step * i as f64)).collect())
}

#[wasm_bindgen]
pub fn phi_curve(kind: &str, alpha: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    phi_samples(kind, alpha, lo, hi, n).map_err(|e| JsError::new(&e.to_string()))
}

/// Values reported for the two-option example.
#[wasm_bindgen]
#[derive(Clone, Copy, Debug)]
pub struct Counterexample {
    pub ce_a: f64,
    pub ce_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    ce_prefers_a: bool,
    phi_prefers_a: bool,
}

#[wasm_bindgen]
impl Counterexample {
    #[wasm_bindgen(getter)]
    pub fn ce_choice(&self) -> String {
        if self.ce_prefers_a { "A" } else { "B" }.into()
    }

    #[wasm_bindgen(getter)]
    pub fn phi_choice(&self) -> String {
        if self.phi_prefers_a { "A" } else { "B" }.into()
    }
}

pub fn evaluate_counterexample(classes: usize, delta: f64) -> sharplab::Result<Counterexample> {
    let r = counterexample_eval(classes, delta)?;
    Ok(Counterexample {
        ce_a: r.ce_a,
        ce_b: r.ce_b,
        phi_a: r.phi_a,
        phi_b: r.phi_b,
        ce_prefers_a: r.ce_prefers == sharplab::losses::OptionChoice::A,
        phi_prefers_a: r.phi_prefers == sharplab::losses::OptionChoice::A,
    })
}

#[wasm_bindgen]
pub fn counterexample(classes: usize, delta: f64) -> Result<Counterexample, JsError> {
    evaluate_counterexample(classes, delta).map_err(|e| JsError::new(&e.to_string()))
}

/// A finished training run on 2-D blobs, flattened for plotting.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct BlobRun {
    valid_acc: Vec<f64>,
    train_ce: Vec<f64>,
    flipped: Vec<u32>,
    points: Vec<f64>,
    labels: Vec<u32>,
    grid: Vec<u32>,
    grid_size: usize,
    pub best_epoch: usize,
    pub best_valid_acc: f64,
}

#[wasm_bindgen]
impl BlobRun {
    pub fn valid_acc(&self) -> Vec<f64> {
        self.valid_acc.clone()
    }

    pub fn train_ce(&self) -> Vec<f64> {
        self.train_ce.clone()
    }

    pub fn flipped(&self) -> Vec<u32> {
        self.flipped.clone()
    }

    /// Training inputs as `x0, y0, x1, y1, …`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    /// Training labels after any injected noise.
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }

    /// Predicted class per cell, row-major from the top-left corner.
    pub fn grid(&self) -> Vec<u32> {
        self.grid.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }
}

/// Options the page exposes for a blob run.
#[derive(Clone, Debug, PartialEq)]
pub struct BlobOptions {
    pub family: String,
    pub rho: f64,
    pub classes: usize,
    pub spread: f64,
    pub noise_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub grid_size: usize,
}

pub fn run_blobs(opts: &BlobOptions) -> sharplab::Result<BlobRun> {
    let mut base = RunConfig::default();
    base.data.n = 600;
    base.data.classes = opts.classes;
    base.data.dim = 2;
    base.data.spread = opts.spread;
    base.data.noise_rate = opts.noise_rate;
    base.data.normalize = false;
    base.hidden = vec![16];
    base.batch_size = 64;
    base.epochs = opts.epochs;
    base.seed = opts.seed;
    base.perturb.rho = opts.rho;
    let cfg = apply_family(&base, &opts.family)?;

    let data = prepare_data(&cfg)?;
    let out = train(&cfg)?;
    let mut model = MlpModel::zeros(model_spec(&cfg, &data))?;
    model.set_params(&out.best.params)?;

    let g = opts.grid_size.max(2);
    let step = 2.0 * VIEW_RADIUS / (g - 1) as f64;
    let mut cells = Vec::with_capacity(2 * g * g);
    for row in 0..g {
        for col in 0..g {
            cells.push(-VIEW_RADIUS + step * col as f64);
            cells.push(VIEW_RADIUS - step * row as f64);
        }
    }
    let logits = model.logits(&Tensor::matrix(g * g, 2, cells)?)?;
    let grid = (0..g * g)
        .map(|i| sharplab::losses::argmax(logits.row(i)) as u32)
        .collect();

    Ok(BlobRun {
        valid_acc: out.history.iter().map(|r| r.valid_acc).collect(),
        train_ce: out.history.iter().map(|r| r.train_ce).collect(),
        flipped: out.history.iter().map(|r| r.flipped_count as u32).collect(),
        points: data.train.inputs.data().to_vec(),
        labels: data.train.labels.iter().map(|&y| y as u32).collect(),
        grid,
        grid_size: g,
        best_epoch: out.best.best_epoch,
        best_valid_acc: out.best.best_valid_acc,
    })
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn train_blobs(
    family: &str,
    rho: f64,
    classes: usize,
    spread: f64,
    noise_rate: f64,
    epochs: usize,
    seed: u32,
    grid_size: usize,
) -> Result<BlobRun, JsError> {
    run_blobs(&BlobOptions {
        family: family.into(),
        rho,
        classes,
        spread,
        noise_rate,
        epochs,
        seed: seed as u64,
        grid_size,
    })
    .map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_samples_cover_range() {
        let v = phi_samples("log", 1.0, -2.0, 2.0, 5).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[2], 0.0);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(phi_samples("hinge", 1.0, 0.0, 1.0, 3).is_err());
        assert!(phi_samples("tanh", 1.0, 1.0, 0.0, 3).is_err());
    }

    #[test]
    fn counterexample_choices() {
        let c = evaluate_counterexample(10, 0.01).unwrap();
        assert!(c.ce_prefers_a && !c.phi_prefers_a);
        assert!(evaluate_counterexample(3, 0.7).is_err());
    }

    #[test]
    fn blob_run_shapes() {
        let opts = BlobOptions {
            family: "bisam-log".into(),
            rho: 0.05,
            classes: 3,
            spread: 0.2,
            noise_rate: 0.1,
            epochs: 5,
            seed: 1,
            grid_size: 12,
        };
        let r = run_blobs(&opts).unwrap();
        assert_eq!(r.valid_acc.len(), 5);
        assert_eq!(r.points.len(), 2 * r.labels.len());
        assert_eq!(r.grid.len(), 144);
        assert!(r.grid.iter().all(|&c| c < 3));
        assert!(r.best_valid_acc > 0.8);
        assert_eq!(run_blobs(&opts).unwrap().grid, r.grid);
    }
}
