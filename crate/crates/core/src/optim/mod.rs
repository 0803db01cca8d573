//! Base SGD, the cosine schedule, and the perturbation-based trainers
//! (SAM, BiSAM and its adaptive and efficient variants).

mod perturb;
mod sgd;
mod step;

pub use perturb::{
    adaptive_perturbation, perturbation, sds_select, swp_mask, AscentLoss, PerturbConfig,
    PerturbFamily, Perturbation, SwpSemantics,
};
pub use sgd::{cosine_eta, Schedule, ScheduleKind, SgdState};
pub use step::{StepReport, Trainer};
