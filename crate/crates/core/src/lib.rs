pub mod autodiff;
pub mod error;

pub use error::{Error, Result};
pub mod checks;
pub mod config;
pub mod data;
pub mod harness;
pub mod losses;
pub mod model;
pub mod optim;
