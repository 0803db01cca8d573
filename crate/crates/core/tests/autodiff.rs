use proptest::prelude::*;
use sharplab::autodiff::{Tape, Tensor, Var};
use sharplab::Error;

type Build = fn(&mut Tape, Var) -> sharplab::Result<Var>;

/// Gradient of `build` at `x` by autodiff and by central differences.
fn both_grads(build: Build, x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let out = build(&mut tape, v).unwrap();
    tape.backward(out).unwrap();
    let analytic = tape.grad(v).unwrap().data().to_vec();

    let eval = |t: Tensor| {
        let mut tape = Tape::new();
        let v = tape.constant(t);
        let out = build(&mut tape, v).unwrap();
        tape.value(out).item()
    };
    let h = 1e-6;
    let numeric = (0..x.numel())
        .map(|i| {
            let mut up = x.clone();
            up.data_mut()[i] += h;
            let mut down = x.clone();
            down.data_mut()[i] -= h;
            (eval(up) - eval(down)) / (2.0 * h)
        })
        .collect();
    (analytic, numeric)
}

fn assert_close(build: Build, x: &Tensor) {
    let (a, n) = both_grads(build, x);
    for (i, (ga, gn)) in a.iter().zip(&n).enumerate() {
        let tol = 1e-6 * (1.0 + ga.abs().max(gn.abs()));
        assert!(
            (ga - gn).abs() < tol,
            "coordinate {i}: autodiff {ga} vs numeric {gn}"
        );
    }
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

// Fixed right-hand operand so matmul gradients are exercised for the left one.
fn weights() -> Tensor {
    Tensor::matrix(3, 2, vec![0.3, -1.1, 0.7, 0.2, -0.5, 0.9]).unwrap()
}

fn smooth_chain(t: &mut Tape, x: Var) -> sharplab::Result<Var> {
    let w = t.constant(weights());
    let z = t.matmul(x, w)?;
    let a = t.tanh(z)?;
    let b = t.softplus(z)?;
    let c = t.mul(a, b)?;
    let l = t.logsumexp_axis(c, 1)?;
    t.mean(l)
}

fn exp_log(t: &mut Tape, x: Var) -> sharplab::Result<Var> {
    let e = t.exp(x)?;
    let s = t.add_scalar(e, 1.0)?;
    let l = t.log(s)?;
    let q = t.scale(l, 3.0)?;
    t.sum(q)
}

fn axis_ops(t: &mut Tape, x: Var) -> sharplab::Result<Var> {
    let s0 = t.sum_axis(x, 0)?;
    let b = t.broadcast_to(s0, &[4, 3])?;
    let d = t.sub(x, b)?;
    let l = t.logsumexp_axis(d, 0)?;
    let sq = t.mul(l, l)?;
    t.sum(sq)
}

fn bias_and_select(t: &mut Tape, x: Var) -> sharplab::Result<Var> {
    let bias = t.constant(Tensor::matrix(1, 3, vec![0.1, -0.2, 0.3]).unwrap());
    let z = t.add_row(x, bias)?;
    let picked = t.index_select(z, &[2, 0, 1, 2])?;
    let r = t.reshape(picked, &[2, 2])?;
    let m = t.mul(r, r)?;
    t.mean(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_gradients_match_differences(x in matrix(4, 3)) {
        assert_close(smooth_chain, &x);
        assert_close(exp_log, &x);
        assert_close(axis_ops, &x);
        assert_close(bias_and_select, &x);
    }

    #[test]
    fn logsumexp_dominates_max(x in matrix(3, 5)) {
        let mut t = Tape::new();
        let v = t.constant(x.clone());
        let l = t.logsumexp_axis(v, 1).unwrap();
        let m = t.max_axis(v, 1).unwrap();
        for i in 0..3 {
            let (lv, mv) = (t.value(l).data()[i], t.value(m).data()[i]);
            prop_assert!(mv <= lv + 1e-12);
            prop_assert!(lv <= mv + 5f64.ln() + 1e-12);
        }
    }

    #[test]
    fn logsumexp_is_shift_invariant(x in matrix(2, 4), c in -500.0f64..500.0) {
        let mut t = Tape::new();
        let v = t.constant(x.clone());
        let shifted = t.add_scalar(v, c).unwrap();
        let a = t.logsumexp_axis(v, 1).unwrap();
        let b = t.logsumexp_axis(shifted, 1).unwrap();
        for i in 0..2 {
            let diff = t.value(b).data()[i] - t.value(a).data()[i] - c;
            prop_assert!(diff.abs() < 1e-9 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn gradient_of_linear_sum_is_ones(x in matrix(3, 3)) {
        let mut t = Tape::new();
        let v = t.param(x);
        let s = t.sum(v).unwrap();
        t.backward(s).unwrap();
        prop_assert!(t.grad(v).unwrap().data().iter().all(|&g| g == 1.0));
    }
}

#[test]
fn huge_logits_stay_finite() {
    let mut t = Tape::new();
    let v = t.param(Tensor::matrix(1, 3, vec![1000.0, 999.0, -1000.0]).unwrap());
    let l = t.logsumexp_axis(v, 1).unwrap();
    let s = t.sum(l).unwrap();
    t.backward(s).unwrap();
    let g = t.grad(v).unwrap().data();
    assert!((t.value(l).item() - (1000.0 + (1.0 + (-1f64).exp()).ln())).abs() < 1e-9);
    assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn log_of_zero_is_reported() {
    let mut t = Tape::new();
    let v = t.constant(Tensor::vector(vec![0.0, 1.0]));
    match t.log(v) {
        Err(Error::NonFinite { op }) => assert_eq!(op, "log"),
        other => panic!("expected non-finite error, got {other:?}"),
    }
}

#[test]
fn shape_mismatch_names_op() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::zeros(&[2, 3]));
    let b = t.constant(Tensor::zeros(&[3, 2]));
    assert!(matches!(t.add(a, b), Err(Error::Shape { op: "add", .. })));
    let c = t.constant(Tensor::zeros(&[2, 2]));
    assert!(matches!(t.matmul(a, c), Err(Error::Shape { .. })));
}

#[test]
fn backward_twice_fails() {
    let mut t = Tape::new();
    let v = t.param(Tensor::scalar(2.0));
    let y = t.mul(v, v).unwrap();
    t.backward(y).unwrap();
    assert_eq!(t.grad(v).unwrap().item(), 4.0);
    assert!(matches!(t.backward(y), Err(Error::GraphConsumed)));
}

#[test]
fn non_scalar_loss_rejected() {
    let mut t = Tape::new();
    let v = t.param(Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(t.backward(v), Err(Error::NotScalar(_))));
}

#[test]
fn shared_subexpression_accumulates() {
    // f(x) = x*x + 3x, f'(2) = 7
    let mut t = Tape::new();
    let x = t.param(Tensor::scalar(2.0));
    let sq = t.mul(x, x).unwrap();
    let lin = t.scale(x, 3.0).unwrap();
    let f = t.add(sq, lin).unwrap();
    t.backward(f).unwrap();
    assert_eq!(t.grad(x).unwrap().item(), 7.0);
}

#[test]
fn relu_gradient_at_zero_is_zero() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![-1.0, 0.0, 2.0]));
    let r = t.relu(x).unwrap();
    let s = t.sum(r).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.grad(x).unwrap().data(), &[0.0, 0.0, 1.0]);
}
