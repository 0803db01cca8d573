use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sharplab::checks::{all_passed, check_gradients, BoundsCheck, CheckReport};
use sharplab::config::{ConfigMap, RunConfig};
use sharplab::harness::{
    accuracy, compare_trainers, hex, model_from_checkpoint, noise_sweep, prepare_data,
    read_checkpoint, train, ComparisonTable,
};
use sharplab::losses::counterexample_eval;
use sharplab::Error;

#[derive(Parser)]
#[command(
    name = "sharplab",
    version,
    about = "Sharpness-aware training experiments on small MLPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set optim.rho=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write metrics, checkpoint and metadata.
    Run(ConfigArgs),
    /// Train several optimizer families over several seeds.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma separated presets, e.g. `sgd,sam,bisam-log`.
        #[arg(long, value_delimiter = ',', default_value = "sam,bisam-log")]
        families: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        seeds: Vec<u64>,
    },
    /// Compare families across label-noise rates.
    NoiseSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "sam,bisam-log")]
        families: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8")]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        seeds: Vec<u64>,
    },
    /// Evaluate the two-option example where cross-entropy and the 0-1
    /// lower bound disagree about the worst perturbation.
    Counterexample {
        #[arg(long = "k", default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
    },
    /// Finite-difference check of every loss gradient.
    CheckGrad {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
    /// Verify the surrogate's lower-bound inequalities on random draws.
    CheckBounds {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 20)]
        max_classes: usize,
        /// Adds a constant to φ so the failure path can be exercised.
        #[arg(long, hide = true, default_value_t = 0.0)]
        sabotage_phi: f64,
    },
    /// Print a checkpoint's header and, given its config, its validation accuracy.
    InspectCheckpoint {
        path: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        EXIT_NUMERIC
    } else {
        match err {
            Error::Checkpoint(_)
            | Error::GraphConsumed
            | Error::NotScalar(_)
            | Error::Shape { .. } => EXIT_CHECK,
            _ => EXIT_CONFIG,
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut map = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    for o in &args.overrides {
        map.set(o)?;
    }
    let cfg = RunConfig::from_map(&map)?;
    println!("# effective config");
    print!("{}", cfg.to_text());
    for w in cfg.perturb.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn print_table(table: &ComparisonTable) {
    println!(
        "{:>6}  {:<12} {:>5}  {:>16}  {:>16}  {:>8}",
        "noise", "family", "seeds", "best valid", "best test", "flips/ep"
    );
    for r in &table.rows {
        let test = r
            .best_test
            .map_or("-".to_string(), |(m, s)| format!("{:.4} ± {:.4}", m, s));
        let flips = if r.flipped.is_empty() {
            0.0
        } else {
            r.flipped.iter().map(|f| f.0).sum::<f64>() / r.flipped.len() as f64
        };
        println!(
            "{:>6}  {:<12} {:>5}  {:>16}  {:>16}  {:>8.2}",
            r.noise_rate,
            r.family,
            r.seeds,
            format!("{:.4} ± {:.4}", r.best_valid_mean, r.best_valid_std),
            test,
            flips
        );
    }
}

fn print_checks(reports: &[CheckReport]) -> ExitCode {
    for r in reports {
        println!("{r}");
    }
    if all_passed(reports) {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        println!(
            "{} check(s) failed",
            reports.iter().filter(|r| !r.passed).count()
        );
        ExitCode::from(EXIT_CHECK)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let out = train(&cfg)?;
            for r in &out.history {
                println!(
                    "epoch {:>4}  ce {:.4}  train_01 {:.4}  valid {:.4}  flipped {:>5}  eta {:.5}",
                    r.epoch, r.train_ce, r.train_01, r.valid_acc, r.flipped_count, r.eta
                );
            }
            println!(
                "best epoch {} valid_acc {:.4}{}",
                out.best.best_epoch,
                out.best.best_valid_acc,
                out.best_test_acc
                    .map_or(String::new(), |t| format!(" test_acc {t:.4}"))
            );
            if let Some(dir) = &cfg.output_dir {
                println!("artifacts in {}", dir.display());
            }
        }
        Command::Compare {
            cfg,
            families,
            seeds,
        } => {
            let cfg = load_config(&cfg)?;
            let (table, _) = compare_trainers(&cfg, &families, &seeds)?;
            print_table(&table);
        }
        Command::NoiseSweep {
            cfg,
            families,
            rates,
            seeds,
        } => {
            let cfg = load_config(&cfg)?;
            let (table, _) = noise_sweep(&cfg, &families, &rates, &seeds)?;
            print_table(&table);
        }
        Command::Counterexample { classes, delta } => {
            let r = counterexample_eval(classes, delta)?;
            println!("K = {}, delta = {}", r.classes, r.delta);
            println!("ce_A  = {:.6}", r.ce_a);
            println!("ce_B  = {:.6}", r.ce_b);
            println!("phi_A = {:.6}", r.phi_a);
            println!("phi_B = {:.6}", r.phi_b);
            println!("CE adversary prefers: {}", r.ce_prefers);
            println!("phi adversary prefers: {}", r.phi_prefers);
        }
        Command::CheckGrad { seed, cases } => {
            return Ok(print_checks(&check_gradients(seed, cases)?))
        }
        Command::CheckBounds {
            seed,
            draws,
            max_classes,
            sabotage_phi,
        } => {
            let check = BoundsCheck {
                seed,
                draws,
                max_classes,
                phi_offset: sabotage_phi,
            };
            return Ok(print_checks(&check.run()?));
        }
        Command::InspectCheckpoint { path, cfg } => {
            let ckpt = read_checkpoint(&path)?;
            println!("path        {}", path.display());
            println!("version     {}", ckpt.version);
            println!("config_hash {}", hex(&ckpt.config_hash));
            println!("params      {}", ckpt.params.len());
            let norm = ckpt.params.iter().map(|p| p * p).sum::<f64>().sqrt();
            println!("param_norm  {norm:.6}");
            if cfg.config.is_some() || !cfg.overrides.is_empty() {
                let cfg = load_config(&cfg)?;
                if cfg.hash() != ckpt.config_hash {
                    println!("config hash mismatch: checkpoint was written by a different config");
                    return Ok(ExitCode::from(EXIT_CHECK));
                }
                let data = prepare_data(&cfg)?;
                let model = model_from_checkpoint(&cfg, &data, &ckpt)?;
                println!("valid_acc   {:.6}", accuracy(&model, &data.valid)?);
                if let Some(t) = &data.test {
                    println!("test_acc    {:.6}", accuracy(&model, t)?);
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
