use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Provenance};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Unit-norm class centers. With `K <= d` these are the basis vectors
/// `e_0..e_{K-1}` (a regular simplex); otherwise `K` equally spaced points on
/// the unit circle spanned by the first two coordinates.
pub fn blob_centers(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|k| {
            let mut c = vec![0.0; dim];
            if classes <= dim {
                c[k] = 1.0;
            } else {
                let angle = 2.0 * PI * k as f64 / classes as f64;
                c[0] = angle.cos();
                c[1] = angle.sin();
            }
            c
        })
        .collect()
}

fn shuffled(rows: Vec<(Vec<f64>, usize)>, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>) {
    let mut rows = rows;
    rows.shuffle(rng);
    let mut data = Vec::new();
    let mut labels = Vec::with_capacity(rows.len());
    for (x, y) in rows {
        data.extend(x);
        labels.push(y);
    }
    (data, labels)
}

/// Isotropic Gaussian clusters (std `spread`) around [`blob_centers`], with
/// class `i mod K` for sample `i` so classes are balanced to within one.
pub fn gen_blobs(n: usize, classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "blobs need dim >= 2, got {dim}"
        )));
    }
    if classes < 2 || n < classes {
        return Err(Error::InvalidArgument(format!(
            "need n >= K >= 2, got n={n} K={classes}"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "spread must be >= 0, got {spread}"
        )));
    }
    let centers = blob_centers(classes, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let rows = (0..n)
        .map(|i| {
            let y = i % classes;
            let x = centers[y]
                .iter()
                .map(|c| c + noise.sample(&mut rng))
                .collect();
            (x, y)
        })
        .collect();
    let (data, labels) = shuffled(rows, &mut rng);
    Dataset::new(
        Tensor::matrix(n, dim, data)?,
        labels,
        classes,
        Provenance::Blobs,
        seed,
    )
}

/// Two interleaved half circles in the plane, Gaussian jitter of std `spread`.
pub fn gen_two_arcs(n: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_class = n.div_ceil(2);
    let rows = (0..n)
        .map(|i| {
            let y = i % 2;
            let t = PI * (i / 2) as f64 / (per_class.max(2) - 1) as f64;
            let (x0, x1) = if y == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            (
                vec![x0 + noise.sample(&mut rng), x1 + noise.sample(&mut rng)],
                y,
            )
        })
        .collect();
    let (data, labels) = shuffled(rows, &mut rng);
    Dataset::new(
        Tensor::matrix(n, 2, data)?,
        labels,
        2,
        Provenance::TwoArcs,
        seed,
    )
}
