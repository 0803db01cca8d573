//! Run configuration and its flat `section.key = value` text format.
//!
//! Grammar, one entry per line (UTF-8):
//!
//! ```text
//! # comment
//! section.key = scalar
//! ```
//!
//! Blank lines are ignored. Scalars are taken verbatim after trimming; a
//! surrounding pair of double quotes is stripped. Lists (`model.hidden`) are
//! comma separated. `none` or an empty value clears an optional key.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::{SurrogateKind, SurrogateSpec};
use crate::optim::{AscentLoss, PerturbConfig, PerturbFamily, ScheduleKind, SwpSemantics};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Blobs,
    TwoArcs,
    Idx,
    Csv,
}

impl DataKind {
    fn name(self) -> &'static str {
        match self {
            DataKind::Blobs => "blobs",
            DataKind::TwoArcs => "two_arcs",
            DataKind::Idx => "idx",
            DataKind::Csv => "csv",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "blobs" => Some(DataKind::Blobs),
            "two_arcs" | "two-arcs" | "arcs" => Some(DataKind::TwoArcs),
            "idx" => Some(DataKind::Idx),
            "csv" => Some(DataKind::Csv),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSpec {
    pub kind: DataKind,
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
    /// Size of a separately generated test set; 0 disables it.
    pub test_n: usize,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub normalize: bool,
    pub noise_rate: f64,
    pub valid_frac: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            kind: DataKind::Blobs,
            n: 2000,
            classes: 4,
            dim: 2,
            spread: 0.3,
            test_n: 0,
            images: None,
            labels: None,
            test_images: None,
            test_labels: None,
            csv: None,
            test_csv: None,
            normalize: false,
            noise_rate: 0.0,
            valid_frac: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DataSpec,
    pub hidden: Vec<usize>,
    pub perturb: PerturbConfig,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epoch budget multiplier applied only to plain SGD.
    pub epoch_multiplier: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub label_smoothing: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSpec::default(),
            hidden: vec![32],
            perturb: PerturbConfig::default(),
            lr: 0.1,
            schedule: ScheduleKind::Cosine,
            momentum: 0.9,
            weight_decay: 5e-4,
            epoch_multiplier: 1,
            epochs: 20,
            batch_size: 128,
            label_smoothing: 0.1,
            seed: 0,
            output_dir: None,
        }
    }
}

/// Every recognized key, in canonical output order.
pub const KEYS: &[&str] = &[
    "data.kind",
    "data.n",
    "data.classes",
    "data.dim",
    "data.spread",
    "data.test_n",
    "data.images",
    "data.labels",
    "data.test_images",
    "data.test_labels",
    "data.csv",
    "data.test_csv",
    "data.normalize",
    "data.noise_rate",
    "data.valid_frac",
    "model.hidden",
    "optim.family",
    "optim.rho",
    "optim.adaptive",
    "optim.swp_beta",
    "optim.swp_semantics",
    "optim.sds_ratio",
    "optim.ascent_loss",
    "optim.grad_norm_floor",
    "optim.lr",
    "optim.schedule",
    "optim.momentum",
    "optim.weight_decay",
    "optim.epoch_multiplier",
    "surrogate.kind",
    "surrogate.alpha",
    "surrogate.mu",
    "train.epochs",
    "train.batch_size",
    "train.label_smoothing",
    "train.seed",
    "train.output_dir",
];

/// Ordered key/value pairs as read from a config file plus overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = k.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    msg: format!("unknown key {key:?}"),
                });
            }
            map.insert(key, unquote(v.trim()).to_string());
        }
        Ok(ConfigMap(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ConfigMap::parse(&text, path)
    }

    /// Applies a `key=value` override. Overrides win over file entries.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!("override must be key=value, got {assignment:?}"))
        })?;
        let key = k.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.0
            .insert(key.to_string(), unquote(v.trim()).to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key}: expected {what}, got {value:?}"))
}

fn is_none(v: &str) -> bool {
    v.is_empty() || v == "none"
}

struct Reader<'a>(&'a ConfigMap);

impl Reader<'_> {
    fn num<T: std::str::FromStr>(&self, key: &str, slot: &mut T, what: &str) -> Result<()> {
        if let Some(v) = self.0.get(key) {
            *slot = v.parse().map_err(|_| bad(key, v, what))?;
        }
        Ok(())
    }

    fn opt_num(&self, key: &str, slot: &mut Option<f64>) -> Result<()> {
        if let Some(v) = self.0.get(key) {
            *slot = if is_none(v) {
                None
            } else {
                Some(v.parse().map_err(|_| bad(key, v, "a number or none"))?)
            };
        }
        Ok(())
    }

    fn path(&self, key: &str, slot: &mut Option<PathBuf>) {
        if let Some(v) = self.0.get(key) {
            *slot = if is_none(v) {
                None
            } else {
                Some(PathBuf::from(v))
            };
        }
    }

    fn flag(&self, key: &str, slot: &mut bool) -> Result<()> {
        if let Some(v) = self.0.get(key) {
            *slot = match v {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return Err(bad(key, v, "true or false")),
            };
        }
        Ok(())
    }

    fn choice<T>(
        &self,
        key: &str,
        slot: &mut T,
        parse: impl Fn(&str) -> Option<T>,
        what: &str,
    ) -> Result<()> {
        if let Some(v) = self.0.get(key) {
            *slot = parse(v).ok_or_else(|| bad(key, v, what))?;
        }
        Ok(())
    }
}

impl RunConfig {
    /// Fills a config from defaults plus whatever the map sets.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let r = Reader(map);
        let mut c = RunConfig::default();
        let d = &mut c.data;
        r.choice(
            "data.kind",
            &mut d.kind,
            DataKind::parse,
            "blobs, two_arcs, idx or csv",
        )?;
        r.num("data.n", &mut d.n, "an integer")?;
        r.num("data.classes", &mut d.classes, "an integer")?;
        r.num("data.dim", &mut d.dim, "an integer")?;
        r.num("data.spread", &mut d.spread, "a number")?;
        r.num("data.test_n", &mut d.test_n, "an integer")?;
        r.path("data.images", &mut d.images);
        r.path("data.labels", &mut d.labels);
        r.path("data.test_images", &mut d.test_images);
        r.path("data.test_labels", &mut d.test_labels);
        r.path("data.csv", &mut d.csv);
        r.path("data.test_csv", &mut d.test_csv);
        r.flag("data.normalize", &mut d.normalize)?;
        r.num("data.noise_rate", &mut d.noise_rate, "a number")?;
        r.num("data.valid_frac", &mut d.valid_frac, "a number")?;

        if let Some(v) = map.get("model.hidden") {
            c.hidden = if is_none(v) {
                Vec::new()
            } else {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| bad("model.hidden", v, "comma separated widths"))
                    })
                    .collect::<Result<_>>()?
            };
        }

        let p = &mut c.perturb;
        r.choice(
            "optim.family",
            &mut p.family,
            PerturbFamily::parse,
            "sgd, sam or bisam",
        )?;
        r.num("optim.rho", &mut p.rho, "a number")?;
        r.flag("optim.adaptive", &mut p.adaptive)?;
        r.opt_num("optim.swp_beta", &mut p.swp_beta)?;
        r.choice(
            "optim.swp_semantics",
            &mut p.swp_semantics,
            SwpSemantics::parse,
            "select or keep-prob",
        )?;
        r.opt_num("optim.sds_ratio", &mut p.sds_ratio)?;
        r.choice(
            "optim.ascent_loss",
            &mut p.ascent_loss,
            |s| match s {
                "surrogate" => Some(AscentLoss::Surrogate),
                "cross_entropy" | "ce" => Some(AscentLoss::CrossEntropy),
                _ => None,
            },
            "surrogate or cross_entropy",
        )?;
        r.num("optim.grad_norm_floor", &mut p.grad_norm_floor, "a number")?;

        let mut kind = SurrogateKind::ShiftedLog;
        r.choice(
            "surrogate.kind",
            &mut kind,
            SurrogateKind::parse,
            "log or tanh",
        )?;
        p.surrogate = SurrogateSpec::default_for(kind);
        r.num("surrogate.alpha", &mut p.surrogate.alpha, "a number")?;
        r.num("surrogate.mu", &mut p.surrogate.mu, "a number")?;

        r.num("optim.lr", &mut c.lr, "a number")?;
        r.choice(
            "optim.schedule",
            &mut c.schedule,
            |s| match s {
                "cosine" => Some(ScheduleKind::Cosine),
                "constant" => Some(ScheduleKind::Constant),
                _ => None,
            },
            "cosine or constant",
        )?;
        r.num("optim.momentum", &mut c.momentum, "a number")?;
        r.num("optim.weight_decay", &mut c.weight_decay, "a number")?;
        r.num(
            "optim.epoch_multiplier",
            &mut c.epoch_multiplier,
            "an integer",
        )?;
        r.num("train.epochs", &mut c.epochs, "an integer")?;
        r.num("train.batch_size", &mut c.batch_size, "an integer")?;
        r.num("train.label_smoothing", &mut c.label_smoothing, "a number")?;
        r.num("train.seed", &mut c.seed, "an integer")?;
        r.path("train.output_dir", &mut c.output_dir);
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut map = ConfigMap::load(path)?;
        for o in overrides {
            map.set(o)?;
        }
        RunConfig::from_map(&map)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return cfg("train.batch_size must be > 0".into());
        }
        if !(self.lr > 0.0) {
            return cfg(format!("optim.lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return cfg(format!(
                "train.label_smoothing must be in [0,1), got {}",
                self.label_smoothing
            ));
        }
        if !(0.0..=1.0).contains(&self.data.noise_rate) {
            return cfg(format!(
                "data.noise_rate must be in [0,1], got {}",
                self.data.noise_rate
            ));
        }
        if !(self.data.valid_frac > 0.0 && self.data.valid_frac < 1.0) {
            return cfg(format!(
                "data.valid_frac must be in (0,1), got {}",
                self.data.valid_frac
            ));
        }
        if self.epoch_multiplier == 0 {
            return cfg("optim.epoch_multiplier must be >= 1".into());
        }
        match self.data.kind {
            DataKind::Idx if self.data.images.is_none() || self.data.labels.is_none() => {
                return cfg("data.kind = idx needs data.images and data.labels".into())
            }
            DataKind::Csv if self.data.csv.is_none() => {
                return cfg("data.kind = csv needs data.csv".into())
            }
            _ => {}
        }
        self.perturb
            .validate()
            .map_err(|e| Error::Config(format!("optim: {e}")))
    }

    /// Effective epoch count after the SGD budget multiplier.
    pub fn effective_epochs(&self) -> usize {
        if self.perturb.family == PerturbFamily::None {
            self.epochs * self.epoch_multiplier
        } else {
            self.epochs
        }
    }

    /// Canonical `key = value` echo of every setting.
    pub fn to_text(&self) -> String {
        let opt_f = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let opt_p = |v: &Option<PathBuf>| {
            v.as_ref()
                .map_or("none".to_string(), |p| p.display().to_string())
        };
        let d = &self.data;
        let p = &self.perturb;
        let values: Vec<String> = vec![
            d.kind.name().into(),
            d.n.to_string(),
            d.classes.to_string(),
            d.dim.to_string(),
            d.spread.to_string(),
            d.test_n.to_string(),
            opt_p(&d.images),
            opt_p(&d.labels),
            opt_p(&d.test_images),
            opt_p(&d.test_labels),
            opt_p(&d.csv),
            opt_p(&d.test_csv),
            d.normalize.to_string(),
            d.noise_rate.to_string(),
            d.valid_frac.to_string(),
            if self.hidden.is_empty() {
                "none".into()
            } else {
                self.hidden
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            },
            p.family.name().into(),
            p.rho.to_string(),
            p.adaptive.to_string(),
            opt_f(p.swp_beta),
            p.swp_semantics.name().into(),
            opt_f(p.sds_ratio),
            match p.ascent_loss {
                AscentLoss::Surrogate => "surrogate".into(),
                AscentLoss::CrossEntropy => "cross_entropy".into(),
            },
            p.grad_norm_floor.to_string(),
            self.lr.to_string(),
            match self.schedule {
                ScheduleKind::Cosine => "cosine".into(),
                ScheduleKind::Constant => "constant".into(),
            },
            self.momentum.to_string(),
            self.weight_decay.to_string(),
            self.epoch_multiplier.to_string(),
            p.surrogate.kind.name().into(),
            p.surrogate.alpha.to_string(),
            p.surrogate.mu.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.label_smoothing.to_string(),
            self.seed.to_string(),
            opt_p(&self.output_dir),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical text, ignoring the output directory.
    pub fn hash(&self) -> [u8; 32] {
        let mut c = self.clone();
        c.output_dir = None;
        Sha256::digest(c.to_text().as_bytes()).into()
    }
}
