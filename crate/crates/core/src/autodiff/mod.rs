//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records operations as they run (define-by-run). Each training
//! step builds a fresh tape, calls [`Tape::backward`] once, and reads the
//! gradients off the parameter leaves.

mod tape;
mod tensor;

pub use tape::{sigmoid, softplus, Tape, Var};
pub use tensor::Tensor;
