//! The `strtac` command line: simulation and convergence checks, dataset
//! sweeps, feature extraction, training, streaming inference and evaluation.
//!
//! Exit codes: 0 when the command ran and every check it declares held, 1 for
//! runtime failures or failed checks, 2 for usage and validation errors.

pub mod criteria;
mod pipeline;
mod simulate;
mod stream;

use std::path::PathBuf;

use anyhow::Result;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use string_tactile::io::{self, RunConfig};

pub use criteria::{Check, Thresholds};

#[derive(Debug, Parser)]
#[command(name = "strtac", version, about = "String-vibration tactile sensing pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (JSON); the `.json` extension may be left off.
    #[arg(short, long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one value, e.g. `--set contact.F=1.0`. Repeatable.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory, replacing `paths.out_dir`.
    #[arg(short, long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate one contact; write audio, steady-state spectra and a peak summary.
    Simulate,
    /// Compare transient and steady-state spectra of one run against predictions.
    Convergence,
    /// Simulate the configured grid and write a dataset.
    Sweep {
        /// Dataset file; defaults to `paths.dataset` or `<out>/dataset.jsonl`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Extract features from recordings.
    Features {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Feature file, or `-` for standard output; defaults to `<out>/features.jsonl`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Seconds skipped at the start of every recording.
        #[arg(long, default_value_t = 0.0)]
        start: f64,
    },
    /// Fit a model bundle on a dataset.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Stream per-window contact estimates for a recording as JSON lines.
    Infer {
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Seconds skipped before the first window.
        #[arg(long, default_value_t = 0.0)]
        start: f64,
    },
    /// Score a bundle on a dataset and write a metrics table.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EvalSplit::Test)]
        split: EvalSplit,
        /// Metrics file; defaults to `<out>/metrics.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Apply the closed-loop accuracy and robustness thresholds.
        #[arg(long)]
        check: bool,
        /// Augmentation policy the robustness thresholds apply to.
        #[arg(long, default_value = "eval15")]
        noise_policy: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    /// Held-out windows only.
    Test,
    /// Every window, including those the bundle was trained on.
    All,
}

/// Whether a command's declared checks held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Loads the configuration named on the command line, or the defaults.
pub fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => io::load_config_with(path, &global.overrides)?,
        None => {
            let c = io::apply_overrides(&RunConfig::default(), &global.overrides)?;
            c.validate()?;
            c
        }
    };
    if let Some(out) = &global.out {
        config.paths.out_dir = out.clone();
    }
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let config = load_config(&cli.global)?;
    match &cli.command {
        Command::Simulate => simulate::simulate(&config),
        Command::Convergence => simulate::convergence(&config),
        Command::Sweep { output } => pipeline::sweep(&config, output.as_deref()),
        Command::Features { inputs, output, start } => stream::features(&config, inputs, output.as_deref(), *start),
        Command::Train { dataset, model } => pipeline::train(&config, dataset.as_deref(), model.as_deref()),
        Command::Infer { input, model, start } => stream::infer(&config, input, model.as_deref(), *start),
        Command::Eval {
            dataset,
            model,
            split,
            output,
            check,
            noise_policy,
        } => pipeline::eval(
            &config,
            &pipeline::EvalArgs {
                dataset: dataset.as_deref(),
                model: model.as_deref(),
                split: *split,
                output: output.as_deref(),
                check: *check,
                noise_policy,
            },
        ),
    }
}

/// 2 for configuration, parse and domain errors anywhere in the chain, else 1.
pub fn error_exit_code(err: &anyhow::Error) -> i32 {
    use string_tactile::Error as E;
    let usage = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<E>(),
            Some(E::Config { .. } | E::Parse { .. } | E::Domain { .. })
        )
    });
    if usage {
        2
    } else {
        1
    }
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("STRTAC_LOG")
        .format_timestamp(None)
        .try_init();
}
