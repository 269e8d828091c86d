//! `prnn`: generate synthetic cohorts, train PRNN / attention models,
//! evaluate responsiveness metrics and compare models.
//!
//! Exit codes: 0 success, 1 argument or configuration error, 2 runtime
//! failure (I/O, divergence, inconsistent inputs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prnn_core::checkpoint::Checkpoint;
use prnn_core::data::GeneratorConfig;
use prnn_core::experiment::{
    compare, evaluate, save_comparison, save_evaluation, save_training, train_model, CohortData,
    ThresholdSource,
};
use prnn_core::model::{Variant, MAX_K};
use prnn_core::trainer::TrainingConfig;
use prnn_core::Error;

#[derive(Parser)]
#[command(
    name = "prnn",
    version,
    about = "Perseverating recurrent networks on synthetic ICU cohorts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and its patient-level split.
    Generate {
        #[arg(long)]
        patients: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (receives cohort.jsonl and split.json).
        #[arg(long)]
        out: PathBuf,
        /// key=value generator overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one model variant; writes checkpoint.json and training_log.csv.
    Train {
        #[arg(long)]
        cohort: PathBuf,
        /// Defaults to split.json next to the cohort file.
        #[arg(long)]
        split: Option<PathBuf>,
        /// k1..k8, prnn (with --k) or attention.
        #[arg(long, default_value = "prnn")]
        model: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Comma-separated hidden sizes, e.g. 128,256,128.
        #[arg(long)]
        layers: Option<String>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        recurrent_dropout: Option<f64>,
        #[arg(long)]
        l2: Option<f64>,
        /// key=value training configuration; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split and write report CSVs.
    Evaluate {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Thresholds::Computed)]
        thresholds: Thresholds,
        #[arg(long)]
        out: PathBuf,
    },
    /// Join several evaluation directories into one comparison CSV.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        eval_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Thresholds {
    /// Nearest-rank percentiles of the test split's percent changes.
    Computed,
    /// The published threshold table bundled with the tool.
    #[value(alias = "reference")]
    Paper,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_argument_error() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e)
        }
    }
}

fn config_error(path: &Path, e: Error) -> Failure {
    Failure::Usage(format!("config {}: {e}", path.display()))
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))
}

fn parse_variant(model: &str, k: Option<usize>) -> Result<Variant, Failure> {
    let variant = match model {
        "attention" => {
            if k.is_some_and(|k| k != 1) {
                return Err(Failure::Usage(
                    "the attention model does not perseverate; use --k 1 or omit it".into(),
                ));
            }
            Variant::Attention
        }
        "prnn" => Variant::Prnn { k: k.unwrap_or(1) },
        m => {
            let named = m
                .strip_prefix('k')
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| {
                    Failure::Usage(format!(
                        "unknown model {m:?}; expected k1..k{MAX_K}, prnn or attention"
                    ))
                })?;
            if k.is_some_and(|k| k != named) {
                return Err(Failure::Usage(format!(
                    "--model {m} conflicts with --k {}",
                    k.unwrap_or(0)
                )));
            }
            Variant::Prnn { k: named }
        }
    };
    variant
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(variant)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            patients,
            seed,
            out,
            config,
        } => {
            let mut cfg = GeneratorConfig::default();
            if let Some(path) = &config {
                cfg.apply_overrides(&read_config(path)?)
                    .map_err(|e| config_error(path, e))?;
            }
            let cohort = CohortData::generate(patients, seed, &cfg)?;
            cohort.save(&out)?;
            println!(
                "{:<12}{:>10}{:>10}{:>11}",
                "split", "episodes", "patients", "mortality"
            );
            for s in cohort.summary() {
                println!(
                    "{:<12}{:>10}{:>10}{:>11.4}",
                    s.name, s.episodes, s.patients, s.mortality_rate
                );
            }
        }
        Command::Train {
            cohort,
            split,
            model,
            k,
            epochs,
            seed,
            learning_rate,
            batch_size,
            layers,
            dropout,
            recurrent_dropout,
            l2,
            config,
            out,
        } => {
            let variant = parse_variant(&model, k)?;
            let mut cfg = TrainingConfig::default();
            if let Some(path) = &config {
                cfg.apply_overrides(&read_config(path)?)
                    .map_err(|e| config_error(path, e))?;
            }
            let mut flags = String::new();
            let mut flag = |key: &str, v: Option<String>| {
                if let Some(v) = v {
                    flags.push_str(&format!("{key} = {v}\n"));
                }
            };
            flag("max_epochs", epochs.map(|v| v.to_string()));
            flag("seed", seed.map(|v| v.to_string()));
            flag("learning_rate", learning_rate.map(|v| v.to_string()));
            flag("batch_size", batch_size.map(|v| v.to_string()));
            flag("layers", layers);
            flag("dropout", dropout.map(|v| v.to_string()));
            flag(
                "recurrent_dropout",
                recurrent_dropout.map(|v| v.to_string()),
            );
            flag("l2", l2.map(|v| v.to_string()));
            cfg.apply_overrides(&flags)
                .map_err(|e| Failure::Usage(e.to_string()))?;

            let data = CohortData::load(&cohort, split.as_deref())?;
            let (checkpoint, log) = train_model(&data, variant, &cfg)?;
            save_training(&out, &checkpoint, &log)?;
            match checkpoint.best_epoch {
                Some(e) => println!("{}: best epoch {e} of {}", variant.label(), log.len()),
                None => println!("{}: no epochs run; initial weights saved", variant.label()),
            }
        }
        Command::Evaluate {
            cohort,
            split,
            checkpoint,
            thresholds,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let data = CohortData::load(&cohort, split.as_deref())?;
            if ck.cohort_fingerprint != data.fingerprint {
                log::warn!("checkpoint was trained on a different cohort or split");
            }
            let source = match thresholds {
                Thresholds::Computed => ThresholdSource::Computed,
                Thresholds::Paper => ThresholdSource::Reference,
            };
            let test = data.select(&data.split.test);
            let eval = evaluate(&ck, &test, source)?;
            save_evaluation(&out, &eval, &test, &data.fingerprint, source)?;
            println!("{}: evaluated {} test episodes", eval.model, test.len());
        }
        Command::Compare { eval_dirs, out } => {
            let rows = compare(&eval_dirs)?;
            save_comparison(&out, &rows)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
