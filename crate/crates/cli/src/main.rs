//! Command-line front end: dataset generation, training, translation,
//! cycle reconstruction and evaluation, driven by one JSON config.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "pcdiff", version, about = "Unpaired point-cloud translation between domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset pair (clean + noisy) as .pcds files.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train one domain model on a .pcds dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file to train on.
        #[arg(long)]
        data: PathBuf,
    },
    /// Translate events from the source model's domain into the target's.
    Translate {
        #[command(flatten)]
        common: Common,
        /// Source-domain model checkpoint.
        #[arg(long)]
        src: PathBuf,
        /// Target-domain model checkpoint.
        #[arg(long)]
        tgt: PathBuf,
        /// Events to translate (.pcds).
        #[arg(long)]
        input: PathBuf,
    },
    /// Translate A -> B -> A and record per-event reconstruction distances.
    Cycle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Score translations: JSD with baselines, cycle chamfer, fitted sigma.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Translated events (.pcds).
        #[arg(long)]
        translated: PathBuf,
        /// Reference events of the target domain (.pcds).
        #[arg(long)]
        reference: PathBuf,
        /// Original source events, enables scatter plots and cycle scoring.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Cycle-reconstructed events matching --source.
        #[arg(long)]
        cycled: Option<PathBuf>,
        /// Emit the fitted-sigma table (lines domain).
        #[arg(long)]
        fitted_sigma: bool,
    },
}

fn resolve(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::GenData { common } => commands::gen_data(&resolve(common)?),
        Command::Train { common, data } => commands::train(&resolve(common)?, data),
        Command::Translate {
            common,
            src,
            tgt,
            input,
        } => commands::cmd_translate(&resolve(common)?, src, tgt, input),
        Command::Cycle {
            common,
            model_a,
            model_b,
            input,
        } => commands::cycle(&resolve(common)?, model_a, model_b, input),
        Command::Evaluate {
            common,
            translated,
            reference,
            source,
            cycled,
            fitted_sigma,
        } => commands::evaluate(
            &resolve(common)?,
            &commands::EvaluateArgs {
                translated,
                reference,
                source: source.as_deref(),
                cycled: cycled.as_deref(),
                fitted_sigma: *fitted_sigma,
            },
        ),
    }
}

/// 2 = config error, 3 = numerical failure, 4 = I/O error.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<pcdiff_core::Error>() {
            return match core {
                pcdiff_core::Error::NonFiniteLoss { .. }
                | pcdiff_core::Error::NonFiniteGradient { .. } => 3,
                pcdiff_core::Error::Io(_)
                | pcdiff_core::Error::Format(_)
                | pcdiff_core::Error::Json(_) => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
