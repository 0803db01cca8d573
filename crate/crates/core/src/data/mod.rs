//! Datasets: synthetic generators, IDX and CSV ingestion, label noise and
//! train/validation splitting. Everything is a deterministic function of its
//! arguments and seed.

mod csv;
mod idx;
mod synth;

pub use self::csv::load_csv;
pub use idx::{load_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synth::{blob_centers, gen_blobs, gen_two_arcs};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Blobs,
    TwoArcs,
    IdxFiles,
    Csv,
}

/// Which part of the experiment a dataset belongs to. Trainers refuse to
/// take gradients on anything but [`SplitRole::Train`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRole {
    Full,
    Train,
    Valid,
    Test,
}

impl SplitRole {
    pub fn name(self) -> &'static str {
        match self {
            SplitRole::Full => "full",
            SplitRole::Train => "train",
            SplitRole::Valid => "valid",
            SplitRole::Test => "test",
        }
    }
}

/// Per-feature standardization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `n × d`
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub provenance: Provenance,
    pub seed: u64,
    pub role: SplitRole,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(
        inputs: Tensor,
        labels: Vec<usize>,
        classes: usize,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        if inputs.shape().len() != 2 || inputs.rows() != labels.len() {
            return Err(Error::Shape {
                op: "dataset",
                lhs: inputs.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes,
            });
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
            provenance,
            seed,
            role: SplitRole::Full,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn subset(&self, idx: &[usize], role: SplitRole) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            provenance: self.provenance,
            seed: self.seed,
            role,
            normalization: self.normalization.clone(),
        }
    }

    pub fn batch(&self, idx: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            role: self.role,
        }
    }

    pub fn as_batch(&self) -> Batch {
        Batch {
            inputs: self.inputs.clone(),
            labels: self.labels.clone(),
            role: self.role,
        }
    }

    /// Per-feature mean and (population) standard deviation.
    pub fn fit_normalization(&self) -> Normalization {
        let (n, d) = (self.len(), self.dim());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(self.inputs.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((v, x), m) in var.iter_mut().zip(self.inputs.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n.max(1) as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalization { mean, std }
    }

    pub fn apply_normalization(&mut self, norm: &Normalization) {
        let d = self.dim();
        for (j, x) in self.inputs.data_mut().iter_mut().enumerate() {
            let f = j % d;
            *x = (*x - norm.mean[f]) / norm.std[f];
        }
        self.normalization = Some(norm.clone());
    }
}

/// A minibatch of inputs and integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub role: SplitRole,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            role: self.role,
        }
    }
}

/// `round(x)` with ties to even.
pub fn round_half_even(x: f64) -> usize {
    let r = x.round_ties_even();
    r.max(0.0) as usize
}

/// Result of label corruption: new labels and which indices were touched.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyLabels {
    pub labels: Vec<usize>,
    pub corrupted: Vec<usize>,
}

/// Replaces exactly `round_half_even(rate·n)` labels, chosen uniformly without
/// replacement, by a label drawn uniformly from the other `K - 1` classes.
pub fn inject_label_noise(
    labels: &[usize],
    rate: f64,
    classes: usize,
    seed: u64,
) -> Result<NoisyLabels> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "noise rate must be in [0,1], got {rate}"
        )));
    }
    let n = labels.len();
    let count = round_half_even(rate * n as f64).min(n);
    if count > 0 && classes < 2 {
        return Err(Error::InvalidArgument(
            "label noise needs at least 2 classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    let mut out = labels.to_vec();
    for &i in &picked {
        let y = labels[i];
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        let r = rng.gen_range(0..classes - 1);
        out[i] = if r < y { r } else { r + 1 };
    }
    Ok(NoisyLabels {
        labels: out,
        corrupted: picked,
    })
}

/// Uniform random partition into train and validation parts.
/// The validation part has `round_half_even(valid_frac·n)` samples.
pub fn split_train_valid(
    dataset: &Dataset,
    valid_frac: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(valid_frac > 0.0 && valid_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "valid_frac must be in (0,1), got {valid_frac}"
        )));
    }
    let n = dataset.len();
    let n_valid = round_half_even(valid_frac * n as f64);
    if n_valid == 0 || n_valid >= n {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot be split with valid_frac {valid_frac}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (valid_idx, train_idx) = order.split_at(n_valid);
    Ok((
        dataset.subset(train_idx, SplitRole::Train),
        dataset.subset(valid_idx, SplitRole::Valid),
    ))
}
