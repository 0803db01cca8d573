use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::MlpModel;

/// Heavy-ball SGD with coupled weight decay:
/// `d = g + λw`, `v ← m v + d`, `w ← w - η v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub momentum: Vec<f64>,
    pub momentum_coeff: f64,
    pub weight_decay: f64,
    pub step_count: u64,
}

impl SgdState {
    pub fn new(dim: usize, momentum_coeff: f64, weight_decay: f64) -> Self {
        SgdState {
            momentum: vec![0.0; dim],
            momentum_coeff,
            weight_decay,
            step_count: 0,
        }
    }

    /// Applies one update and returns the direction `v` that was subtracted
    /// (scaled by `η`).
    pub fn apply(&mut self, model: &mut MlpModel, grad: &[f64], eta: f64) -> Result<Vec<f64>> {
        let mut w = model.params();
        if grad.len() != w.len() || self.momentum.len() != w.len() {
            return Err(Error::Shape {
                op: "sgd",
                lhs: vec![w.len()],
                rhs: vec![grad.len(), self.momentum.len()],
            });
        }
        for ((wi, vi), gi) in w.iter_mut().zip(self.momentum.iter_mut()).zip(grad) {
            let d = gi + self.weight_decay * *wi;
            *vi = self.momentum_coeff * *vi + d;
            *wi -= eta * *vi;
        }
        if !w.is_finite() {
            return Err(Error::NonFinite { op: "sgd" });
        }
        model.set_params(&w)?;
        self.step_count += 1;
        Ok(self.momentum.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Cosine,
}

/// Learning-rate schedule over `total_steps` updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub eta0: f64,
    pub total_steps: u64,
}

impl Schedule {
    pub fn cosine(eta0: f64, total_steps: u64) -> Self {
        Schedule {
            kind: ScheduleKind::Cosine,
            eta0,
            total_steps,
        }
    }

    pub fn constant(eta0: f64) -> Self {
        Schedule {
            kind: ScheduleKind::Constant,
            eta0,
            total_steps: u64::MAX,
        }
    }

    /// Step size at step `t`, `0 <= t <= total_steps`.
    pub fn eta(&self, t: u64) -> Result<f64> {
        match self.kind {
            ScheduleKind::Constant => Ok(self.eta0),
            ScheduleKind::Cosine => cosine_eta(self, t),
        }
    }
}

/// Half-cosine decay `η₀ · ½(1 + cos(π t / T))`.
pub fn cosine_eta(schedule: &Schedule, t: u64) -> Result<f64> {
    if schedule.total_steps == 0 || t > schedule.total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {t} outside schedule of {} steps",
            schedule.total_steps
        )));
    }
    let frac = t as f64 / schedule.total_steps as f64;
    Ok(schedule.eta0 * 0.5 * (1.0 + (PI * frac).cos()))
}
