use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{hex, Checkpoint, CheckpointFile, CHECKPOINT_VERSION};
use crate::config::{DataKind, RunConfig};
use crate::data::{
    gen_blobs, gen_two_arcs, inject_label_noise, load_csv, load_idx, split_train_valid, Batch,
    Dataset, SplitRole,
};
use crate::error::{Error, Result};
use crate::losses::{correct_mask, zero_one_loss};
use crate::model::{MlpModel, MlpSpec};
use crate::optim::{Schedule, ScheduleKind, SgdState, Trainer};

pub const METRICS_HEADER: &str =
    "epoch,train_ce,train_01,valid_acc,test_acc,flipped_count,mean_eps_norm,eta,wall_ms";
pub const PRNG_NAME: &str = "ChaCha8 (rand_chacha)";

/// Wall-clock timer for the metrics `wall_ms` column. Browsers (wasm32
/// without a host clock in std) always read 0.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_ms(&self) -> u64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_millis() as u64;
        #[cfg(target_arch = "wasm32")]
        0
    }
}

/// Independent RNG streams derived from the run seed.
#[derive(Clone, Copy)]
enum Stream {
    Data = 1,
    Test = 2,
    Split = 3,
    Noise = 4,
    Init = 5,
    Shuffle = 6,
    Swp = 7,
}

/// splitmix64 finalizer over `(seed, stream)`.
fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut z = seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One row of the per-epoch metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub epoch: usize,
    pub train_ce: f64,
    pub train_01: f64,
    pub valid_acc: f64,
    pub test_acc: Option<f64>,
    /// Samples flipped from correct to wrong by the step's perturbation,
    /// summed over the epoch's training batches.
    pub flipped_count: usize,
    pub mean_eps_norm: f64,
    pub eta: f64,
    pub wall_ms: u64,
}

impl RunRecord {
    /// CSV row; `test_acc` is empty when no test split is configured.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.train_ce,
            self.train_01,
            self.valid_acc,
            self.test_acc.map_or(String::new(), |v| v.to_string()),
            self.flipped_count,
            self.mean_eps_norm,
            self.eta,
            self.wall_ms
        )
    }
}

/// Train/validation/test splits ready for a run.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Option<Dataset>,
    /// Number of training labels replaced by label noise.
    pub corrupted: usize,
}

pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let d = &cfg.data;
    let (full, test) = match d.kind {
        DataKind::Blobs => {
            let full = gen_blobs(
                d.n,
                d.classes,
                d.dim,
                d.spread,
                derive_seed(cfg.seed, Stream::Data),
            )?;
            let test = (d.test_n > 0)
                .then(|| {
                    gen_blobs(
                        d.test_n,
                        d.classes,
                        d.dim,
                        d.spread,
                        derive_seed(cfg.seed, Stream::Test),
                    )
                })
                .transpose()?;
            (full, test)
        }
        DataKind::TwoArcs => {
            let full = gen_two_arcs(d.n, d.spread, derive_seed(cfg.seed, Stream::Data))?;
            let test = (d.test_n > 0)
                .then(|| gen_two_arcs(d.test_n, d.spread, derive_seed(cfg.seed, Stream::Test)))
                .transpose()?;
            (full, test)
        }
        DataKind::Idx => {
            let (images, labels) = d.images.as_ref().zip(d.labels.as_ref()).ok_or_else(|| {
                Error::Config("data.kind = idx needs data.images and data.labels".into())
            })?;
            let full = load_idx(images, labels)?;
            let test = match (&d.test_images, &d.test_labels) {
                (Some(i), Some(l)) => Some(load_idx(i, l)?),
                _ => None,
            };
            (full, test)
        }
        DataKind::Csv => {
            let path = d
                .csv
                .as_ref()
                .ok_or_else(|| Error::Config("data.kind = csv needs data.csv".into()))?;
            let full = load_csv(path)?;
            let test = d.test_csv.as_ref().map(load_csv).transpose()?;
            (full, test)
        }
    };
    let mut test = test.map(|mut t| {
        t.role = SplitRole::Test;
        t
    });
    let (mut train, mut valid) =
        split_train_valid(&full, d.valid_frac, derive_seed(cfg.seed, Stream::Split))?;

    let noisy = inject_label_noise(
        &train.labels,
        d.noise_rate,
        train.classes,
        derive_seed(cfg.seed, Stream::Noise),
    )?;
    train.labels = noisy.labels;

    if d.normalize {
        let norm = train.fit_normalization();
        train.apply_normalization(&norm);
        valid.apply_normalization(&norm);
        if let Some(t) = test.as_mut() {
            t.apply_normalization(&norm);
        }
    }
    Ok(PreparedData {
        train,
        valid,
        test,
        corrupted: noisy.corrupted.len(),
    })
}

pub fn accuracy(model: &MlpModel, data: &Dataset) -> Result<f64> {
    let logits = model.logits(&data.inputs)?;
    Ok(1.0 - zero_one_loss(&logits, &data.labels)?)
}

/// Samples that are correct at `w` and wrong at `w + eps`. The model's
/// weights are bit-identical afterwards.
pub fn flipped_under_perturbation(
    model: &mut MlpModel,
    batch: &Batch,
    eps: &[f64],
) -> Result<usize> {
    let saved = model.params();
    let before = correct_mask(&model.logits(&batch.inputs)?, &batch.labels)?;
    model.add_to_params(eps)?;
    let after = model
        .logits(&batch.inputs)
        .and_then(|z| correct_mask(&z, &batch.labels));
    model.set_params(&saved)?;
    let after = after?;
    Ok(before
        .iter()
        .zip(&after)
        .filter(|(b, a)| **b && !**a)
        .count())
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<RunRecord>,
    pub best: Checkpoint,
    /// Test accuracy at the best-validation epoch, when a test split exists.
    pub best_test_acc: Option<f64>,
    pub n_train: usize,
    pub corrupted: usize,
}

impl TrainOutcome {
    pub fn corrupted_fraction(&self) -> f64 {
        if self.n_train == 0 {
            0.0
        } else {
            self.corrupted as f64 / self.n_train as f64
        }
    }
}

struct Artifacts {
    metrics: BufWriter<File>,
    dir: std::path::PathBuf,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("metrics.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut metrics = BufWriter::new(file);
        writeln!(metrics, "{METRICS_HEADER}").map_err(|e| Error::io(&path, e))?;
        Ok(Artifacts {
            metrics,
            dir: dir.to_path_buf(),
        })
    }

    fn append(&mut self, record: &RunRecord) -> Result<()> {
        let path = self.dir.join("metrics.csv");
        writeln!(self.metrics, "{}", record.csv_row())
            .and_then(|_| self.metrics.flush())
            .map_err(|e| Error::io(&path, e))
    }
}

fn write_metadata(dir: &Path, cfg: &RunConfig, outcome: &TrainOutcome) -> Result<()> {
    let mut text = String::new();
    text.push_str("# run metadata\n");
    text.push_str(&format!(
        "software = sharplab {}\n",
        env!("CARGO_PKG_VERSION")
    ));
    text.push_str(&format!("prng = {PRNG_NAME}\n"));
    text.push_str(&format!("seed = {}\n", cfg.seed));
    text.push_str(&format!("config_hash = {}\n", hex(&cfg.hash())));
    let widths: Vec<String> = outcome
        .best
        .model
        .widths()
        .iter()
        .map(usize::to_string)
        .collect();
    text.push_str(&format!("model.widths = {}\n", widths.join(",")));
    text.push_str(&format!("best_epoch = {}\n", outcome.best.best_epoch));
    text.push_str(&format!(
        "best_valid_acc = {}\n",
        outcome.best.best_valid_acc
    ));
    text.push_str(&format!(
        "best_test_acc = {}\n",
        outcome
            .best_test_acc
            .map_or("none".into(), |v| v.to_string())
    ));
    text.push_str(&format!("n_train = {}\n", outcome.n_train));
    text.push_str(&format!("corrupted_labels = {}\n", outcome.corrupted));
    text.push_str(&format!(
        "corrupted_fraction = {}\n",
        outcome.corrupted_fraction()
    ));
    text.push_str("# effective config\n");
    text.push_str(&cfg.to_text());
    let path = dir.join("run_meta.txt");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Runs a full training job. Writes `metrics.csv` (flushed every epoch),
/// `best.ckpt` and `run_meta.txt` into `cfg.output_dir` when it is set.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    train_prepared(cfg, &data)
}

pub fn model_spec(cfg: &RunConfig, data: &PreparedData) -> MlpSpec {
    MlpSpec {
        input_dim: data.train.dim(),
        hidden: cfg.hidden.clone(),
        classes: data.train.classes,
    }
}

/// Rebuilds the model a checkpoint was taken from.
pub fn model_from_checkpoint(
    cfg: &RunConfig,
    data: &PreparedData,
    ckpt: &CheckpointFile,
) -> Result<MlpModel> {
    let mut model = MlpModel::zeros(model_spec(cfg, data))?;
    if ckpt.params.len() != model.param_count() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, config describes {}",
            ckpt.params.len(),
            model.param_count()
        )));
    }
    model.set_params(&ckpt.params)?;
    Ok(model)
}

pub fn train_prepared(cfg: &RunConfig, data: &PreparedData) -> Result<TrainOutcome> {
    let (train, valid) = (&data.train, &data.valid);
    let spec = model_spec(cfg, data);
    let mut model = MlpModel::new(spec.clone(), derive_seed(cfg.seed, Stream::Init))?;

    let epochs = cfg.effective_epochs();
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size) as u64;
    let total_steps = (epochs as u64 * steps_per_epoch).max(1);
    let schedule = match cfg.schedule {
        ScheduleKind::Cosine => Schedule::cosine(cfg.lr, total_steps),
        ScheduleKind::Constant => Schedule::constant(cfg.lr),
    };
    let sgd = SgdState::new(model.param_count(), cfg.momentum, cfg.weight_decay);
    let mut trainer = Trainer::new(
        cfg.perturb.clone(),
        sgd,
        schedule,
        cfg.label_smoothing,
        derive_seed(cfg.seed, Stream::Swp),
    )?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Shuffle));
    let mut artifacts = cfg.output_dir.as_deref().map(Artifacts::open).transpose()?;

    let config_hash = cfg.hash();
    let mut best = Checkpoint {
        version: CHECKPOINT_VERSION,
        model: spec,
        params: model.params().0,
        config_hash,
        best_epoch: 0,
        best_valid_acc: accuracy(&model, valid)?,
    };
    let mut best_test_acc = data
        .test
        .as_ref()
        .map(|t| accuracy(&model, t))
        .transpose()?;
    let mut history = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=epochs {
        let started = Stopwatch::start();
        order.shuffle(&mut shuffle_rng);
        let (mut ce_sum, mut seen, mut flipped, mut eps_sum, mut steps) =
            (0.0, 0usize, 0usize, 0.0, 0usize);
        let mut eta = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.batch(chunk);
            let step = trainer.sgd.step_count;
            let report = trainer.step(&mut model, &batch).map_err(|e| {
                if e.is_numeric() {
                    Error::Numeric {
                        step,
                        source: Box::new(e),
                    }
                } else {
                    e
                }
            })?;
            if steps == 0 {
                eta = report.eta;
            }
            ce_sum += report.train_ce * report.batch_size as f64;
            seen += report.batch_size;
            flipped += report.flipped;
            eps_sum += report.eps_norm;
            steps += 1;
        }
        let train_01 = zero_one_loss(&model.logits(&train.inputs)?, &train.labels)?;
        let valid_acc = accuracy(&model, valid)?;
        let test_acc = data
            .test
            .as_ref()
            .map(|t| accuracy(&model, t))
            .transpose()?;
        let record = RunRecord {
            epoch,
            train_ce: ce_sum / seen as f64,
            train_01,
            valid_acc,
            test_acc,
            flipped_count: flipped,
            mean_eps_norm: eps_sum / steps as f64,
            eta,
            wall_ms: started.elapsed_ms(),
        };
        if epoch == 1 || valid_acc > best.best_valid_acc {
            best.params = model.params().0;
            best.best_epoch = epoch;
            best.best_valid_acc = valid_acc;
            best_test_acc = test_acc;
        }
        if let Some(a) = artifacts.as_mut() {
            a.append(&record)?;
        }
        history.push(record);
    }

    let outcome = TrainOutcome {
        history,
        best,
        best_test_acc,
        n_train: train.len(),
        corrupted: data.corrupted,
    };
    if let Some(dir) = cfg.output_dir.as_deref() {
        outcome.best.write(&dir.join("best.ckpt"))?;
        write_metadata(dir, cfg, &outcome)?;
    }
    Ok(outcome)
}
