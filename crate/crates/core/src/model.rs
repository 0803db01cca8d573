//! Fully connected ReLU classifier and its flat parameter view.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::losses::{cross_entropy_var, q_loss_var, SurrogateSpec};

/// All trainable weights concatenated layer by layer (weight, then bias).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        ParameterVector(vec![0.0; len])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ParameterVector(self.0.iter().map(|v| c * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl Deref for ParameterVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl MlpSpec {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.classes);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    /// `d_in × d_out`
    weight: Tensor,
    /// `1 × d_out`
    bias: Tensor,
}

/// What a gradient evaluation differentiates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    CrossEntropy { smoothing: f64 },
    Surrogate(SurrogateSpec),
}

/// Result of one forward/backward pass.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: ParameterVector,
    pub logits: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

impl MlpModel {
    /// Weights and biases uniform in `±1/√fan_in`, seeded.
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(spec, |fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            rng.gen_range(-bound..=bound)
        })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        Self::build(spec, |_| 0.0)
    }

    fn build(spec: MlpSpec, mut init: impl FnMut(usize) -> f64) -> Result<Self> {
        let widths = spec.widths();
        if widths.contains(&0) || spec.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad layer widths {widths:?}"
            )));
        }
        let layers = widths
            .windows(2)
            .map(|p| {
                let (d_in, d_out) = (p[0], p[1]);
                let w = (0..d_in * d_out).map(|_| init(d_in)).collect();
                let b = (0..d_out).map(|_| init(d_in)).collect();
                Ok(Layer {
                    weight: Tensor::matrix(d_in, d_out, w)?,
                    bias: Tensor::matrix(1, d_out, b)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(MlpModel { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.numel() + l.bias.numel())
            .sum()
    }

    pub fn params(&self) -> ParameterVector {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.data());
        }
        ParameterVector(out)
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                op: "set_params",
                lhs: vec![self.param_count()],
                rhs: vec![params.len()],
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            for t in [&mut l.weight, &mut l.bias] {
                let n = t.numel();
                t.data_mut().copy_from_slice(&params[offset..offset + n]);
                offset += n;
            }
        }
        Ok(())
    }

    /// In-place `w += delta`.
    pub fn add_to_params(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.param_count() {
            return Err(Error::Shape {
                op: "add_to_params",
                lhs: vec![self.param_count()],
                rhs: vec![delta.len()],
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            for t in [&mut l.weight, &mut l.bias] {
                for (w, d) in t.data_mut().iter_mut().zip(&delta[offset..]) {
                    *w += d;
                }
                offset += t.numel();
            }
        }
        Ok(())
    }

    /// Records the forward pass. Returns the parameter leaves (in flat order)
    /// and the `n×K` logits.
    pub fn forward(&self, tape: &mut Tape, inputs: Var) -> Result<(Vec<Var>, Var)> {
        let in_shape = tape.value(inputs).shape().to_vec();
        if in_shape.len() != 2 || in_shape[1] != self.spec.input_dim {
            return Err(Error::Shape {
                op: "forward",
                lhs: in_shape,
                rhs: vec![self.spec.input_dim],
            });
        }
        let mut leaves = Vec::with_capacity(2 * self.layers.len());
        let mut h = inputs;
        for (i, l) in self.layers.iter().enumerate() {
            let w = tape.param(l.weight.clone());
            let b = tape.param(l.bias.clone());
            leaves.push(w);
            leaves.push(b);
            let z = tape.matmul(h, w)?;
            h = tape.add_row(z, b)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h)?;
            }
        }
        Ok((leaves, h))
    }

    /// Logits without recording gradients.
    pub fn logits(&self, inputs: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(inputs.clone());
        let (_, z) = self.forward(&mut tape, x)?;
        Ok(tape.value(z).clone())
    }

    /// Loss value, flat gradient and logits at the current weights.
    pub fn evaluate(
        &self,
        inputs: &Tensor,
        labels: &[usize],
        objective: &Objective,
    ) -> Result<Evaluation> {
        let mut tape = Tape::new();
        let x = tape.constant(inputs.clone());
        let (leaves, z) = self.forward(&mut tape, x)?;
        let loss = match objective {
            Objective::CrossEntropy { smoothing } => {
                cross_entropy_var(&mut tape, z, labels, *smoothing)?
            }
            Objective::Surrogate(spec) => q_loss_var(&mut tape, z, labels, spec)?,
        };
        tape.backward(loss)?;
        let mut grad = Vec::with_capacity(self.param_count());
        for leaf in leaves {
            match tape.grad(leaf) {
                Some(g) => grad.extend_from_slice(g.data()),
                None => grad.extend(std::iter::repeat_n(0.0, tape.value(leaf).numel())),
            }
        }
        Ok(Evaluation {
            loss: tape.value(loss).item(),
            grad: ParameterVector(grad),
            logits: tape.value(z).clone(),
        })
    }
}
