use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::train::{train, TrainOutcome};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::losses::{SurrogateKind, SurrogateSpec};
use crate::optim::{AscentLoss, PerturbFamily};

/// Named optimizer presets accepted by [`apply_family`].
pub const FAMILIES: &[&str] = &[
    "sgd",
    "sam",
    "asam",
    "esam",
    "bisam-log",
    "bisam-tanh",
    "abisam-log",
    "abisam-tanh",
    "ebisam-log",
    "ebisam-tanh",
    "bisam-ce",
];

const EFFICIENT_DEFAULT: f64 = 0.5;

/// Rewrites the optimizer section of `cfg` for a named preset. Radius,
/// schedule and data settings are left alone; a surrogate whose kind matches
/// the preset keeps its configured `α` and `μ`.
pub fn apply_family(cfg: &RunConfig, name: &str) -> Result<RunConfig> {
    let mut out = cfg.clone();
    let p = &mut out.perturb;
    let (base, surrogate) = match name.split_once('-') {
        Some((b, "log")) => (b, Some(SurrogateKind::ShiftedLog)),
        Some((b, "tanh")) => (b, Some(SurrogateKind::Tanh)),
        Some(("bisam", "ce")) => ("bisam-ce", None),
        None if name == "bisam" => ("bisam", Some(SurrogateKind::ShiftedLog)),
        None => (name, None),
        _ => return Err(unknown(name)),
    };
    let efficient = |p: &mut crate::optim::PerturbConfig| {
        p.swp_beta = Some(p.swp_beta.unwrap_or(EFFICIENT_DEFAULT));
        p.sds_ratio = Some(p.sds_ratio.unwrap_or(EFFICIENT_DEFAULT));
    };
    let keep_efficiency = (p.swp_beta, p.sds_ratio);
    p.adaptive = false;
    p.swp_beta = None;
    p.sds_ratio = None;
    p.ascent_loss = AscentLoss::Surrogate;
    match base {
        "sgd" if surrogate.is_none() => p.family = PerturbFamily::None,
        "sam" | "asam" | "esam" if surrogate.is_none() => {
            p.family = PerturbFamily::Sam;
            p.adaptive = base == "asam";
            if base == "esam" {
                (p.swp_beta, p.sds_ratio) = keep_efficiency;
                efficient(p);
            }
        }
        "bisam" | "abisam" | "ebisam" if surrogate.is_some() => {
            p.family = PerturbFamily::BiSam;
            p.adaptive = base == "abisam";
            if base == "ebisam" {
                (p.swp_beta, p.sds_ratio) = keep_efficiency;
                efficient(p);
            }
        }
        "bisam-ce" => {
            p.family = PerturbFamily::BiSam;
            p.ascent_loss = AscentLoss::CrossEntropy;
        }
        _ => return Err(unknown(name)),
    }
    if let Some(kind) = surrogate {
        if p.surrogate.kind != kind {
            p.surrogate = SurrogateSpec::default_for(kind);
        }
    }
    out.validate()?;
    Ok(out)
}

fn unknown(name: &str) -> Error {
    Error::Config(format!(
        "unknown optimizer family `{name}`; expected one of {}",
        FAMILIES.join(", ")
    ))
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate over seeds for one (noise rate, family) group.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub noise_rate: f64,
    pub family: String,
    pub seeds: usize,
    pub best_valid_mean: f64,
    pub best_valid_std: f64,
    /// `None` when no test split is configured.
    pub best_test: Option<(f64, f64)>,
    pub final_train_01_mean: f64,
    pub final_train_01_std: f64,
    pub corrupted_fraction: f64,
    /// Per epoch: mean and std of `flipped_count` across seeds.
    pub flipped: Vec<(f64, f64)>,
}

/// Per-family aggregates, sorted by noise rate then family order as given.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub const SUMMARY_HEADER: &str = "noise_rate,family,seeds,best_valid_mean,best_valid_std,best_test_mean,best_test_std,final_train_01_mean,final_train_01_std,corrupted_fraction";
pub const FLIPPED_HEADER: &str = "noise_rate,family,epoch,flipped_mean,flipped_std";

impl ComparisonTable {
    pub fn summary_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for r in &self.rows {
            let (tm, ts) = r
                .best_test
                .map_or((String::new(), String::new()), |(m, s)| {
                    (m.to_string(), s.to_string())
                });
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.noise_rate,
                r.family,
                r.seeds,
                r.best_valid_mean,
                r.best_valid_std,
                tm,
                ts,
                r.final_train_01_mean,
                r.final_train_01_std,
                r.corrupted_fraction
            ));
        }
        s
    }

    /// Long-format per-epoch flipped counts, ready for plotting.
    pub fn flipped_csv(&self) -> String {
        let mut s = format!("{FLIPPED_HEADER}\n");
        for r in &self.rows {
            for (i, (m, sd)) in r.flipped.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.noise_rate,
                    r.family,
                    i + 1,
                    m,
                    sd
                ));
            }
        }
        s
    }

    pub fn row(&self, family: &str, noise_rate: f64) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.noise_rate == noise_rate)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("summary.csv", self.summary_csv()),
            ("flipped.csv", self.flipped_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// One finished (rate, family, seed) cell.
#[derive(Clone, Debug)]
pub struct Cell {
    pub noise_rate: f64,
    pub family: String,
    pub seed: u64,
    pub outcome: TrainOutcome,
}

fn rate_label(rate: f64) -> String {
    format!("noise-{rate}")
}

fn run_grid(
    base: &RunConfig,
    families: &[String],
    rates: &[f64],
    seeds: &[u64],
) -> Result<Vec<Cell>> {
    if families.is_empty() {
        return Err(Error::Config(
            "at least one optimizer family is required".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut jobs = Vec::new();
    for (ri, &rate) in rates.iter().enumerate() {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("noise rate {rate} outside [0,1]")));
        }
        for (fi, family) in families.iter().enumerate() {
            let mut cfg = apply_family(base, family)?;
            cfg.data.noise_rate = rate;
            for &seed in seeds {
                let mut c = cfg.clone();
                c.seed = seed;
                c.output_dir = base.output_dir.as_ref().map(|d| {
                    let d = if rates.len() > 1 {
                        d.join(rate_label(rate))
                    } else {
                        d.clone()
                    };
                    d.join(family).join(format!("seed-{seed}"))
                });
                jobs.push(((ri, fi, seed), family.clone(), rate, c));
            }
        }
    }
    let mut cells: Vec<((usize, usize, u64), Cell)> = jobs
        .into_par_iter()
        .map(|(key, family, noise_rate, cfg)| {
            train(&cfg).map(|outcome| {
                (
                    key,
                    Cell {
                        noise_rate,
                        family,
                        seed: cfg.seed,
                        outcome,
                    },
                )
            })
        })
        .collect::<Result<_>>()?;
    cells.sort_by_key(|(k, _)| *k);
    Ok(cells.into_iter().map(|(_, c)| c).collect())
}

fn aggregate(cells: &[Cell]) -> ComparisonTable {
    let mut rows = Vec::new();
    let mut start = 0;
    while start < cells.len() {
        let head = &cells[start];
        let end = start
            + cells[start..]
                .iter()
                .take_while(|c| c.family == head.family && c.noise_rate == head.noise_rate)
                .count();
        let group = &cells[start..end];
        let col = |f: &dyn Fn(&TrainOutcome) -> f64| {
            mean_std(&group.iter().map(|c| f(&c.outcome)).collect::<Vec<_>>())
        };
        let (best_valid_mean, best_valid_std) = col(&|o| o.best.best_valid_acc);
        let best_test = group
            .iter()
            .map(|c| c.outcome.best_test_acc)
            .collect::<Option<Vec<_>>>()
            .map(|v| mean_std(&v));
        let (final_train_01_mean, final_train_01_std) =
            col(&|o| o.history.last().map_or(f64::NAN, |r| r.train_01));
        let (corrupted_fraction, _) = col(&|o| o.corrupted_fraction());
        let epochs = group
            .iter()
            .map(|c| c.outcome.history.len())
            .min()
            .unwrap_or(0);
        let flipped = (0..epochs)
            .map(|e| {
                mean_std(
                    &group
                        .iter()
                        .map(|c| c.outcome.history[e].flipped_count as f64)
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        rows.push(ComparisonRow {
            noise_rate: head.noise_rate,
            family: head.family.clone(),
            seeds: group.len(),
            best_valid_mean,
            best_valid_std,
            best_test,
            final_train_01_mean,
            final_train_01_std,
            corrupted_fraction,
            flipped,
        });
        start = end;
    }
    ComparisonTable { rows }
}

/// Trains every (family, seed) pair on the base config in parallel and
/// aggregates per family. Writes `summary.csv` and `flipped.csv` to the base
/// output directory when one is set.
pub fn compare_trainers(
    base: &RunConfig,
    families: &[String],
    seeds: &[u64],
) -> Result<(ComparisonTable, Vec<Cell>)> {
    let cells = run_grid(base, families, &[base.data.noise_rate], seeds)?;
    let table = aggregate(&cells);
    if let Some(dir) = &base.output_dir {
        table.write(dir)?;
    }
    Ok((table, cells))
}

/// Like [`compare_trainers`] with an extra outer loop over label-noise rates.
/// Noise only ever touches the training split.
pub fn noise_sweep(
    base: &RunConfig,
    families: &[String],
    rates: &[f64],
    seeds: &[u64],
) -> Result<(ComparisonTable, Vec<Cell>)> {
    if rates.is_empty() {
        return Err(Error::Config("at least one noise rate is required".into()));
    }
    let cells = run_grid(base, families, rates, seeds)?;
    let table = aggregate(&cells);
    if let Some(dir) = &base.output_dir {
        table.write(dir)?;
    }
    Ok((table, cells))
}
