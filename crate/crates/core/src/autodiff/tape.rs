use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Relu(Var),
    Log(Var),
    Exp(Var),
    Tanh(Var),
    Softplus(Var),
    Sum(Var),
    Mean(Var),
    SumAxis(Var),
    /// `argmax` holds, per output slot, the flat input index that won.
    MaxAxis {
        input: Var,
        argmax: Vec<usize>,
    },
    LogSumExpAxis {
        input: Var,
    },
    BroadcastTo(Var),
    IndexSelect {
        input: Var,
        labels: Vec<usize>,
    },
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Define-by-run record of tensor operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so insertion order is a valid
/// topological order. A tape supports exactly one [`Tape::backward`] call.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Splits a shape around `axis` into (outer, len, inner) extents.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let len = shape[axis];
    let inner = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// For every flat index of `out_shape`, the flat index of the broadcast source.
fn broadcast_map(src_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let src_strides = strides(src_shape);
    let out_strides = strides(out_shape);
    let numel: usize = out_shape.iter().product();
    (0..numel)
        .map(|flat| {
            let mut rem = flat;
            let mut src = 0;
            for d in 0..out_shape.len() {
                let coord = rem / out_strides[d];
                rem %= out_strides[d];
                if src_shape[d] != 1 {
                    src += coord * src_strides[d];
                }
            }
            src
        })
        .collect()
}

/// `log(1 + e^x)`. Below the cutoff the direct form is exact enough and keeps
/// `softplus(log(e - 1)) == 1` bit-exact.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Record an input tensor. Leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated on a leaf by the last backward pass.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: &'static str, value: Tensor, kind: Op, inputs: &[Var]) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op: kind,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn zip(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: fn(f64, f64) -> f64,
        kind: Op,
    ) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(op, value, kind, &[a, b])
    }

    fn map(&mut self, op: &'static str, a: Var, f: impl Fn(f64) -> f64, kind: Op) -> Result<Var> {
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(op, value, kind, &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.map("scale", a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.map("add_scalar", a, |x| x + c, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.map("log", a, f64::ln, Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.map("exp", a, f64::exp, Op::Exp(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map("tanh", a, f64::tanh, Op::Tanh(a))
    }

    /// `log(1 + e^x)` evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.map("softplus", a, softplus, Op::Softplus(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let xv = x[i * k + p];
                if xv == 0.0 {
                    continue;
                }
                let yrow = &y[p * n..(p + 1) * n];
                for (o, &yv) in orow.iter_mut().zip(yrow) {
                    *o += xv * yv;
                }
            }
        }
        let value = Tensor::matrix(m, n, out)?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.numel() == 0 {
            return Err(Error::InvalidArgument("mean of empty tensor".into()));
        }
        let m = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    fn check_axis(&self, op: &'static str, a: Var, axis: usize) -> Result<()> {
        let shape = self.shape(a);
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(Error::Shape {
                op,
                lhs: shape.to_vec(),
                rhs: vec![axis],
            });
        }
        Ok(())
    }

    /// Sum along `axis`, keeping that axis with extent 1.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.check_axis("sum_axis", a, axis)?;
        let shape = self.shape(a).to_vec();
        let (outer, len, inner) = axis_split(&shape, axis);
        let x = self.value(a).data();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                out.push((0..len).map(|j| x[base + j * inner]).sum());
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let value = Tensor::new(out_shape, out)?;
        self.push("sum_axis", value, Op::SumAxis(a), &[a])
    }

    /// Maximum along `axis`, keeping that axis with extent 1.
    ///
    /// Ties route the gradient to the lowest index.
    pub fn max_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.check_axis("max_axis", a, axis)?;
        let shape = self.shape(a).to_vec();
        let (outer, len, inner) = axis_split(&shape, axis);
        let x = self.value(a).data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut best = base;
                for j in 1..len {
                    let idx = base + j * inner;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let value = Tensor::new(out_shape, out)?;
        self.push("max_axis", value, Op::MaxAxis { input: a, argmax }, &[a])
    }

    /// `log Σ exp` along `axis` in max-shifted form, keeping the axis.
    pub fn logsumexp_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.check_axis("logsumexp_axis", a, axis)?;
        let shape = self.shape(a).to_vec();
        let (outer, len, inner) = axis_split(&shape, axis);
        let x = self.value(a).data();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let m = (0..len)
                    .map(|j| x[base + j * inner])
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = (0..len).map(|j| (x[base + j * inner] - m).exp()).sum();
                out.push(m + s.ln());
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let value = Tensor::new(out_shape, out)?;
        self.push(
            "logsumexp_axis",
            value,
            Op::LogSumExpAxis { input: a },
            &[a],
        )
    }

    /// Expand extent-1 dimensions to `shape`. Ranks must match.
    pub fn broadcast_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let src = self.shape(a).to_vec();
        let ok = src.len() == shape.len() && src.iter().zip(shape).all(|(&s, &o)| s == o || s == 1);
        if !ok {
            return Err(Error::Shape {
                op: "broadcast_to",
                lhs: src,
                rhs: shape.to_vec(),
            });
        }
        let map = broadcast_map(&src, shape);
        let x = self.value(a).data();
        let data = map.iter().map(|&i| x[i]).collect();
        let value = Tensor::new(shape.to_vec(), data)?;
        self.push("broadcast_to", value, Op::BroadcastTo(a), &[a])
    }

    /// Picks `logits[i, labels[i]]` for each row, giving an `n×1` column.
    pub fn index_select(&mut self, a: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::Shape {
                op: "index_select",
                lhs: shape,
                rhs: vec![labels.len()],
            });
        }
        let k = shape[1];
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: k,
            });
        }
        let x = self.value(a).data();
        let data = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| x[i * k + y])
            .collect();
        let value = Tensor::matrix(labels.len(), 1, data)?;
        let kind = Op::IndexSelect {
            input: a,
            labels: labels.to_vec(),
        };
        self.push("index_select", value, kind, &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape.to_vec())?;
        self.push("reshape", value, Op::Reshape(a), &[a])
    }

    /// Row-broadcast add of a `1×k` bias onto an `n×k` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let b = self.broadcast_to(bias, &shape)?;
        self.add(a, b)
    }

    /// Propagate `d loss / d leaf` into every leaf that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::NotScalar(self.shape(loss).to_vec()));
        }
        self.consumed = true;

        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        let requires: Vec<bool> = self.nodes.iter().map(|n| n.requires_grad).collect();

        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { op: "backward" });
            }
            if matches!(self.nodes[id].op, Op::Leaf) {
                let shape = self.nodes[id].value.shape().to_vec();
                self.nodes[id].grad = Some(Tensor::new(shape, g)?);
                continue;
            }
            let node = &self.nodes[id];
            let out = node.value.data();
            let acc = |v: Var, contrib: Vec<f64>, grads: &mut Vec<Option<Vec<f64>>>| {
                if !requires[v.0] {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => {
                        for (e, c) in existing.iter_mut().zip(contrib) {
                            *e += c;
                        }
                    }
                    slot @ None => *slot = Some(contrib),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    acc(*a, g.clone(), &mut grads);
                    acc(*b, g, &mut grads);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.iter().map(|v| -v).collect(), &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    let (xa, xb) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                    let ga = g.iter().zip(xb).map(|(g, y)| g * y).collect();
                    let gb = g.iter().zip(xa).map(|(g, x)| g * x).collect();
                    acc(*a, ga, &mut grads);
                    acc(*b, gb, &mut grads);
                }
                Op::Scale(a, c) => acc(*a, g.iter().map(|v| c * v).collect(), &mut grads),
                Op::AddScalar(a) => acc(*a, g, &mut grads),
                Op::BroadcastTo(a) => {
                    let src = self.nodes[a.0].value.shape().to_vec();
                    let map = broadcast_map(&src, node.value.shape());
                    let mut ga = vec![0.0; self.nodes[a.0].value.numel()];
                    for (o, &s) in map.iter().enumerate() {
                        ga[s] += g[o];
                    }
                    acc(*a, ga, &mut grads);
                }
                Op::MatMul(a, b) => {
                    let (sa, sb) = (self.nodes[a.0].value.shape(), self.nodes[b.0].value.shape());
                    let (m, k, nn) = (sa[0], sa[1], sb[1]);
                    let (x, y) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                    // dA = G·Bᵀ, dB = Aᵀ·G
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; k * nn];
                    for i in 0..m {
                        let grow = &g[i * nn..(i + 1) * nn];
                        for p in 0..k {
                            let yrow = &y[p * nn..(p + 1) * nn];
                            ga[i * k + p] = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                            let xv = x[i * k + p];
                            if xv != 0.0 {
                                for (gbv, &gv) in gb[p * nn..(p + 1) * nn].iter_mut().zip(grow) {
                                    *gbv += xv * gv;
                                }
                            }
                        }
                    }
                    acc(*a, ga, &mut grads);
                    acc(*b, gb, &mut grads);
                }
                Op::Relu(a) => {
                    let x = self.nodes[a.0].value.data();
                    let ga = g
                        .iter()
                        .zip(x)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    acc(*a, ga, &mut grads);
                }
                Op::Log(a) => {
                    let x = self.nodes[a.0].value.data();
                    acc(
                        *a,
                        g.iter().zip(x).map(|(g, x)| g / x).collect(),
                        &mut grads,
                    );
                }
                Op::Exp(a) => acc(
                    *a,
                    g.iter().zip(out).map(|(g, y)| g * y).collect(),
                    &mut grads,
                ),
                Op::Tanh(a) => {
                    let ga = g.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
                    acc(*a, ga, &mut grads);
                }
                Op::Softplus(a) => {
                    let x = self.nodes[a.0].value.data();
                    let ga = g.iter().zip(x).map(|(g, &x)| g * sigmoid(x)).collect();
                    acc(*a, ga, &mut grads);
                }
                Op::Sum(a) => {
                    let len = self.nodes[a.0].value.numel();
                    acc(*a, vec![g[0]; len], &mut grads);
                }
                Op::Mean(a) => {
                    let len = self.nodes[a.0].value.numel();
                    acc(*a, vec![g[0] / len as f64; len], &mut grads);
                }
                Op::SumAxis(a) => {
                    let map = broadcast_map(node.value.shape(), self.nodes[a.0].value.shape());
                    acc(*a, map.iter().map(|&o| g[o]).collect(), &mut grads);
                }
                Op::MaxAxis { input, argmax } => {
                    let mut ga = vec![0.0; self.nodes[input.0].value.numel()];
                    for (o, &src) in argmax.iter().enumerate() {
                        ga[src] += g[o];
                    }
                    acc(*input, ga, &mut grads);
                }
                Op::LogSumExpAxis { input, .. } => {
                    let src = self.nodes[input.0].value.shape();
                    let x = self.nodes[input.0].value.data();
                    let map = broadcast_map(node.value.shape(), src);
                    let ga = map
                        .iter()
                        .enumerate()
                        .map(|(i, &o)| g[o] * (x[i] - out[o]).exp())
                        .collect();
                    acc(*input, ga, &mut grads);
                }
                Op::IndexSelect { input, labels } => {
                    let k = self.nodes[input.0].value.cols();
                    let mut ga = vec![0.0; self.nodes[input.0].value.numel()];
                    for (i, &y) in labels.iter().enumerate() {
                        ga[i * k + y] += g[i];
                    }
                    acc(*input, ga, &mut grads);
                }
                Op::Reshape(a) => acc(*a, g, &mut grads),
            }
        }
        Ok(())
    }
}
