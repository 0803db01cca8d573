use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn sharplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MINIMAL: &str = "\
# four blobs in the plane
data.kind = blobs
data.n = 300
data.spread = 0.2
model.hidden = 8
train.epochs = 3
train.batch_size = 32
";

fn write_config(dir: &Path) -> String {
    let p = dir.join("run.conf");
    fs::write(&p, MINIMAL).unwrap();
    p.display().to_string()
}

fn metrics_without_wall(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn run_writes_artifacts_and_echoes_config() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let o = sharplab(&[
        "run",
        "--config",
        &cfg,
        "--set",
        &format!("train.output_dir={}", out.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("data.n = 300"));
    assert!(text.contains("train.epochs = 3"));
    for f in ["metrics.csv", "best.ckpt", "run_meta.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = sharplab(&[
        "inspect-checkpoint",
        out.join("best.ckpt").to_str().unwrap(),
        "--config",
        &cfg,
        "--set",
        &format!("train.output_dir={}", out.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("valid_acc"));
    let o = sharplab(&[
        "inspect-checkpoint",
        out.join("best.ckpt").to_str().unwrap(),
        "--config",
        &cfg,
        "--set",
        "optim.rho=0.3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_radius_matches_sgd_end_to_end() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let runs = [("sgd", "optim.family=sgd"), ("bisam0", "optim.rho=0")];
    for (name, set) in runs {
        let out = dir.path().join(name);
        let o = sharplab(&[
            "run",
            "--config",
            &cfg,
            "--set",
            set,
            "--set",
            &format!("train.output_dir={}", out.display()),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        metrics_without_wall(&dir.path().join("sgd/metrics.csv")),
        metrics_without_wall(&dir.path().join("bisam0/metrics.csv"))
    );
}

#[test]
fn config_errors_exit_two() {
    let o = sharplab(&["run", "--config", "/definitely/missing.conf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/definitely/missing.conf"));

    let o = sharplab(&["run", "--set", "optim.rhoo=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("optim.rhoo"));

    let o = sharplab(&["run", "--set", "optim.rho=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho"));
}

#[test]
fn numeric_failure_exits_three_with_step() {
    let o = sharplab(&[
        "run",
        "--set",
        "optim.lr=1e200",
        "--set",
        "optim.schedule=constant",
        "--set",
        "train.epochs=2",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"));
}

#[test]
fn counterexample_report() {
    let o = sharplab(&["counterexample", "--k", "10", "--delta", "0.01"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("ce_A  = 2.2072"));
    assert!(text.contains("ce_B  = 0.7133"));
    assert!(text.contains("CE adversary prefers: A"));
    assert!(text.contains("phi adversary prefers: B"));

    assert!(sharplab(&["counterexample", "--k", "3", "--delta", "0.49"])
        .status
        .success());
    assert_eq!(
        sharplab(&["counterexample", "--k", "3", "--delta", "0.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn checks_pass_and_sabotage_fails() {
    let o = sharplab(&["check-grad", "--cases", "20"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = sharplab(&["check-bounds", "--draws", "200"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("mu=0.1") && stdout(&o).contains("mu=10"));

    let o = sharplab(&["check-bounds", "--draws", "200", "--sabotage-phi", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("counterexample: "));
}

#[test]
fn compare_writes_tables() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("cmp");
    let o = sharplab(&[
        "compare",
        "--config",
        &cfg,
        "--families",
        "sam,bisam-log",
        "--seeds",
        "0,1",
        "--set",
        &format!("train.output_dir={}", out.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("summary.csv").exists());
    assert!(out.join("flipped.csv").exists());
    assert!(stdout(&o).contains("bisam-log"));
}
