//! End-to-end acceptance checks, one printed verdict per criterion.
//! Reference values come from closed forms or independent oracles written
//! here, never from the library's own outputs.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sharplab::checks::{check_gradients, BoundsCheck};
use sharplab::config::RunConfig;
use sharplab::data::{gen_blobs, inject_label_noise, split_train_valid, Batch, Dataset};
use sharplab::harness::{
    accuracy, apply_family, compare_trainers, model_from_checkpoint, prepare_data, read_checkpoint,
    train, FAMILIES,
};
use sharplab::losses::{counterexample_eval, OptionChoice, SurrogateSpec};
use sharplab::model::{MlpModel, MlpSpec};
use sharplab::optim::{
    adaptive_perturbation, perturbation, sds_select, swp_mask, AscentLoss, PerturbConfig, Schedule,
    SgdState, SwpSemantics, Trainer,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let took = start.elapsed();
    v.detail = format!("{}; {:.2}s", v.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            v.passed = false;
            v.detail
                .push_str(&format!(" exceeds {}s budget", limit.as_secs()));
        }
    }
    v
}

// 1
fn counterexample() -> Verdict {
    let mut wrong = Vec::new();
    for k in 3..=100 {
        for delta in [1e-4, 1e-3, 1e-2] {
            let r = counterexample_eval(k, delta).unwrap();
            if r.ce_prefers != OptionChoice::A || r.phi_prefers != OptionChoice::B {
                wrong.push((k, delta));
            }
        }
    }
    let r = counterexample_eval(10, 0.01).unwrap();
    let targets = [
        (r.ce_a, 2.2073),
        (r.ce_b, 0.7133),
        (r.phi_b - r.phi_a, 0.0300),
    ];
    let off: Vec<_> = targets
        .iter()
        .filter(|(v, t)| (v - t).abs() > 1e-4)
        .collect();
    verdict(
        wrong.is_empty() && off.is_empty(),
        format!(
            "294 (K, delta) verdicts, {} wrong; ce_A={:.5} ce_B={:.5} phi_B-phi_A={:.5}",
            wrong.len(),
            r.ce_a,
            r.ce_b,
            r.phi_b - r.phi_a
        ),
    )
}

// 2 and 3 share one suite run
fn bounds() -> (Verdict, Verdict, Duration) {
    let start = Instant::now();
    let reports = BoundsCheck::default().run().unwrap();
    let took = start.elapsed();
    let summarize = |pick: &dyn Fn(&str) -> bool| {
        let sel: Vec<_> = reports.iter().filter(|r| pick(&r.name)).collect();
        let worst = sel
            .iter()
            .map(|r| r.worst_margin)
            .fold(f64::INFINITY, f64::min);
        let cases: usize = sel.iter().map(|r| r.cases).sum();
        let failed: Vec<String> = sel
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.to_string())
            .collect();
        (sel.len(), failed, worst, cases)
    };
    let (n2, f2, w2, c2) = summarize(&|n| n.starts_with("0-1"));
    let (n3, f3, w3, c3) = summarize(&|n| n.starts_with("log-sum-exp"));
    (
        verdict(
            n2 == 6 && f2.is_empty(),
            format!(
                "{n2} configurations, {c2} draws, worst slack {w2:+.3e} {}",
                f2.join(" ")
            ),
        ),
        verdict(
            n3 == 3 && f3.is_empty(),
            format!(
                "{n3} mu values, {c3} draws, worst margin {w3:+.3e} {}",
                f3.join(" ")
            ),
        ),
        took,
    )
}

// 4
fn gradients() -> Verdict {
    let reports = check_gradients(2024, 100).unwrap();
    let ok = reports.len() == 3 && reports.iter().all(|r| r.passed && r.cases == 100);
    let worst = reports
        .iter()
        .map(|r| sharplab::checks::GRAD_TOLERANCE - r.worst_margin)
        .fold(0.0, f64::max);
    verdict(
        ok,
        format!("CE, Q tanh, Q log x 100 models; worst relative error {worst:.2e}"),
    )
}

// 5
fn geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_radius = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..200);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
        for rho in [0.01, 0.05, 1.0] {
            let p = perturbation(&g, rho, 1e-12).unwrap();
            let norm = p.eps.iter().map(|e| e * e).sum::<f64>().sqrt();
            worst_radius = worst_radius.max((norm - rho).abs() / rho);
        }
    }
    let mut worst_cov = 0.0f64;
    for _ in 0..200 {
        let dim = rng.gen_range(1..50);
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let base = adaptive_perturbation(&w, &g, 0.05, 1e-12).unwrap().eps;
        for c in [0.1, 3.0, 10.0] {
            let cw: Vec<f64> = w.iter().map(|x| c * x).collect();
            let gc: Vec<f64> = g.iter().map(|x| x / c).collect();
            let e = adaptive_perturbation(&cw, &gc, 0.05, 1e-12).unwrap().eps;
            let num: f64 = e
                .iter()
                .zip(base.iter())
                .map(|(a, b)| (a - c * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = base.iter().map(|b| (c * b).powi(2)).sum::<f64>().sqrt();
            worst_cov = worst_cov.max(num / den);
        }
    }
    verdict(
        worst_radius <= 1e-9 && worst_cov <= 1e-9,
        format!(
            "radius rel. error {worst_radius:.1e}, adaptive covariance rel. error {worst_cov:.1e}"
        ),
    )
}

// 6
fn reduction() -> Verdict {
    let full = gen_blobs(400, 3, 4, 0.7, 21).unwrap();
    let (train_set, _) = split_train_valid(&full, 0.2, 1).unwrap();
    let spec = MlpSpec {
        input_dim: 4,
        hidden: vec![16],
        classes: 3,
    };
    let batches: Vec<Batch> = (0..train_set.len())
        .collect::<Vec<_>>()
        .chunks(32)
        .map(|c| train_set.batch(c))
        .collect();
    let run = |cfg: PerturbConfig| -> Vec<Vec<f64>> {
        let mut model = MlpModel::new(spec.clone(), 3).unwrap();
        let sgd = SgdState::new(model.param_count(), 0.9, 5e-4);
        let mut t = Trainer::new(cfg, sgd, Schedule::cosine(0.1, 100), 0.1, 17).unwrap();
        (0..100)
            .map(|s| {
                t.step(&mut model, &batches[s % batches.len()]).unwrap();
                model.params().0
            })
            .collect()
    };
    let as_bits = |t: &Vec<Vec<f64>>| -> Vec<Vec<u64>> {
        t.iter()
            .map(|r| r.iter().map(|x| x.to_bits()).collect())
            .collect()
    };
    let sgd = as_bits(&run(PerturbConfig::sgd()));
    let mut a = PerturbConfig::bisam(0.0, SurrogateSpec::default());
    a.adaptive = true;
    let mut e = PerturbConfig::bisam(0.0, SurrogateSpec::default());
    e.swp_beta = Some(0.5);
    e.sds_ratio = Some(0.5);
    let variants = [
        ("SAM", PerturbConfig::sam(0.0)),
        ("BiSAM", PerturbConfig::bisam(0.0, SurrogateSpec::default())),
        ("A-BiSAM", a),
        ("E-BiSAM", e),
    ];
    let mismatched: Vec<&str> = variants
        .iter()
        .filter(|(_, c)| as_bits(&run(c.clone())) != sgd)
        .map(|(n, _)| *n)
        .collect();

    let sam = run(PerturbConfig::sam(0.05));
    let mut diag = PerturbConfig::bisam(0.05, SurrogateSpec::default());
    diag.ascent_loss = AscentLoss::CrossEntropy;
    let bi = run(diag);
    let gap = sam
        .iter()
        .zip(&bi)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    verdict(
        mismatched.is_empty() && gap <= 1e-12,
        format!(
            "rho=0 bitwise vs SGD over 100 steps, mismatches {:?}; CE-ascent BiSAM vs SAM max gap {gap:.1e}",
            mismatched
        ),
    )
}

// 7
fn efficiency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_select = 0.0f64;
    for beta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let m = swp_mask(100_000, beta, SwpSemantics::Select, &mut rng);
        let frac = m.iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        worst_select = worst_select.max((frac - beta).abs());
    }

    // Per-coordinate mean of the keep-prob mask should be 1.
    let mut worst_bias = 0.0f64;
    let dim = 64;
    for beta in [0.1, 0.25] {
        let mut sums = vec![0.0; dim];
        for _ in 0..10_000 {
            for (s, v) in sums
                .iter_mut()
                .zip(swp_mask(dim, beta, SwpSemantics::KeepProb, &mut rng))
            {
                *s += v;
            }
        }
        for s in sums {
            worst_bias = worst_bias.max((s / 10_000.0 - 1.0).abs());
        }
    }

    let mut ratio_ok = true;
    let mut order_ok = true;
    for _ in 0..2000 {
        let n = rng.gen_range(1..300);
        let ratio = rng.gen_range(0.01..=1.0);
        let gains: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(-5.0f64..5.0) * 4.0).round() / 4.0)
            .collect();
        let keep = sds_select(&gains, ratio).unwrap();
        ratio_ok &= (keep.len() as f64 / n as f64 - ratio).abs() <= 1.0 / n as f64;
        let floor = keep.iter().map(|&i| gains[i]).fold(f64::INFINITY, f64::min);
        order_ok &= (0..n)
            .filter(|i| !keep.contains(i))
            .all(|i| gains[i] <= floor);
    }
    verdict(
        worst_select <= 0.01 && worst_bias <= 0.02 && ratio_ok && order_ok,
        format!(
            "select fraction error {worst_select:.4}; keep-prob worst coordinate bias {worst_bias:.4}; SDS ratio ok {ratio_ok}, order ok {order_ok}"
        ),
    )
}

/// Monte Carlo accuracy of the exact posterior argmax for four isotropic
/// Gaussians of std `sigma` at the unit-circle points, equal priors.
fn bayes_accuracy(sigma: f64, samples: usize) -> f64 {
    let centers = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut correct = 0usize;
    for i in 0..samples {
        let y = i % 4;
        let x = (
            centers[y].0 + noise.sample(&mut rng),
            centers[y].1 + noise.sample(&mut rng),
        );
        let density = |c: &(f64, f64)| {
            (-((x.0 - c.0).powi(2) + (x.1 - c.1).powi(2)) / (2.0 * sigma * sigma)).exp()
        };
        let best = (0..4)
            .max_by(|&a, &b| density(&centers[a]).total_cmp(&density(&centers[b])))
            .unwrap();
        correct += (best == y) as usize;
    }
    correct as f64 / samples as f64
}

/// Every training point is closer to its own center than to any other.
fn separable(ds: &Dataset) -> bool {
    let centers = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    (0..ds.len()).all(|i| {
        let x = ds.inputs.row(i);
        let d = |c: &(f64, f64)| (x[0] - c.0).powi(2) + (x[1] - c.1).powi(2);
        (0..4).all(|k| k == ds.labels[i] || d(&centers[ds.labels[i]]) < d(&centers[k]))
    })
}

fn blobs_config(spread: f64, epochs: usize) -> RunConfig {
    let mut c = RunConfig::default();
    c.data.n = 2000;
    c.data.classes = 4;
    c.data.dim = 2;
    c.data.spread = spread;
    c.data.normalize = false;
    c.epochs = epochs;
    c
}

// 8
fn desk_scale() -> (Verdict, String) {
    let sep = blobs_config(0.1, 50);
    let full = gen_blobs(2000, 4, 2, 0.1, 0).unwrap();
    let oracle_separable = separable(&full);
    let families: Vec<String> = FAMILIES.iter().map(|s| s.to_string()).collect();
    let (_, cells) = compare_trainers(&sep, &families, &[0]).unwrap();
    let not_fit: Vec<String> = cells
        .iter()
        .filter(|c| !c.outcome.history.iter().any(|r| r.train_01 == 0.0))
        .map(|c| {
            let best = c
                .outcome
                .history
                .iter()
                .map(|r| r.train_01)
                .fold(1.0, f64::min);
            format!("{}({best:.4})", c.family)
        })
        .collect();

    let sigma = 0.5;
    let mut noisy = blobs_config(sigma, 30);
    noisy.data.noise_rate = 0.2;
    let seeds = [0, 1, 2, 3, 4];
    let pair = vec!["sam".to_string(), "bisam-log".to_string()];
    let (table, _) = compare_trainers(&noisy, &pair, &seeds).unwrap();
    let sam = table.row("sam", 0.2).unwrap();
    let bi = table.row("bisam-log", 0.2).unwrap();
    let bayes = bayes_accuracy(sigma, 400_000);
    let floor = bayes - 0.10;
    let close = (bi.best_valid_mean - sam.best_valid_mean).abs() <= 0.02;
    let above = sam.best_valid_mean > floor && bi.best_valid_mean > floor;

    let epochs = sam.flipped.len().min(bi.flipped.len());
    let ahead = (0..epochs)
        .filter(|&e| bi.flipped[e].0 >= sam.flipped[e].0)
        .count();
    let trend = format!(
        "flipped-count trend: BiSAM >= SAM in {ahead}/{epochs} epochs ({})",
        if 2 * ahead > epochs {
            "holds"
        } else {
            "WARNING: does not hold at this scale"
        }
    );
    (
        verdict(
            oracle_separable && not_fit.is_empty() && close && above,
            format!(
                "separable data {oracle_separable}, {} families fit ({}); noisy: SAM {:.4}, BiSAM {:.4}, Bayes {:.4}, floor {:.4}",
                cells.len() - not_fit.len(),
                if not_fit.is_empty() { "all".to_string() } else { format!("missing {}", not_fit.join(" ")) },
                sam.best_valid_mean,
                bi.best_valid_mean,
                bayes,
                floor
            ),
        ),
        trend,
    )
}

// 9
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut c = blobs_config(0.4, 6);
    c.data.test_n = 500;
    c.perturb = apply_family(&c, "ebisam-tanh").unwrap().perturb;
    let read = |name: &str| -> Vec<String> {
        std::fs::read_to_string(dir.path().join(name).join("metrics.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let mut outs = Vec::new();
    for name in ["first", "second"] {
        c.output_dir = Some(dir.path().join(name));
        outs.push(train(&c).unwrap());
    }
    let same = read("first") == read("second");
    let ckpt = read_checkpoint(&dir.path().join("first/best.ckpt")).unwrap();
    let data = prepare_data(&c).unwrap();
    let model = model_from_checkpoint(&c, &data, &ckpt).unwrap();
    let gap = (accuracy(&model, &data.valid).unwrap() - outs[0].best.best_valid_acc).abs();
    verdict(
        same && gap <= 1e-12,
        format!("metrics identical {same}; checkpoint validation gap {gap:.1e}"),
    )
}

// 10
fn label_noise() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 5003;
    let k = 10;
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut problems = Vec::new();
    for rate in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let out = inject_label_noise(&labels, rate, k, 42).unwrap();
        let changed = labels
            .iter()
            .zip(&out.labels)
            .filter(|(a, b)| a != b)
            .count();
        let expected = (rate * n as f64).round_ties_even() as usize;
        let unchanged_picks = out
            .corrupted
            .iter()
            .filter(|&&i| out.labels[i] == labels[i])
            .count();
        let again = inject_label_noise(&labels, rate, k, 42).unwrap();
        if changed != expected || unchanged_picks > 0 || again != out {
            problems.push(format!(
                "rate {rate}: changed {changed}, expected {expected}"
            ));
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "n={n}, rates 0..0.8; {}",
            if problems.is_empty() {
                "exact".into()
            } else {
                problems.join("; ")
            }
        ),
    )
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    results.push((
        1,
        "counterexample verdicts and values",
        timed(Some(Duration::from_secs(1)), counterexample),
    ));
    let (lower_bound, sandwich, took) = bounds();
    let within = |mut v: Verdict| {
        v.detail = format!("{}; suite {:.2}s", v.detail, took.as_secs_f64());
        if took > Duration::from_secs(10) {
            v.passed = false;
            v.detail.push_str(" exceeds 10s budget");
        }
        v
    };
    results.push((2, "0-1 loss lower-bounds shifted Q", within(lower_bound)));
    results.push((3, "log-sum-exp sandwich", within(sandwich)));
    results.push((
        4,
        "gradients match finite differences",
        timed(Some(Duration::from_secs(30)), gradients),
    ));
    results.push((5, "perturbation geometry", timed(None, geometry)));
    results.push((6, "zero-radius reduction to SGD", timed(None, reduction)));
    results.push((7, "SWP and SDS mechanics", timed(None, efficiency)));
    let mut trend = String::new();
    results.push((
        8,
        "desk-scale training sanity",
        timed(Some(Duration::from_secs(300)), || {
            let (v, t) = desk_scale();
            trend = t;
            v
        }),
    ));
    results.push((
        9,
        "determinism and checkpoint round trip",
        timed(None, determinism),
    ));
    results.push((10, "label-noise procedure", timed(None, label_noise)));

    println!();
    for (n, name, v) in &results {
        println!(
            "criterion {n:>2} {}: {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("soft check (criterion 8): {trend}");
    let failed = results.iter().filter(|r| !r.2.passed).count();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        total.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
