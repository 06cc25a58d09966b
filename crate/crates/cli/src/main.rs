mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqtensor::{Error, Result};

use config::RunConfig;

/// Tensor descriptors for skeleton sequences: synthesize, encode, train and
/// evaluate.
///
/// Reports go to stdout as JSON; progress and warnings go to stderr.
/// Exit codes: 0 success, 1 input/output or format error, 2 configuration
/// error, 3 numeric failure or failed verification.
#[derive(Debug, Parser)]
#[command(name = "seqtensor", version)]
struct Cli {
    /// TOML run configuration; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set sck.beta1=0.7`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for synthesis and checks; also overrides `synth.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a labelled synthetic dataset as JSON lines.
    Synth,
    /// Encode a JSON-lines sequence file into a descriptor file.
    Encode { input: PathBuf },
    /// Check kernel identities, positive definiteness and EPN round trips.
    Verify,
    /// Train a linear SVM on the training split of a descriptor file.
    Train { descriptors: PathBuf },
    /// Score a trained model on both splits of a descriptor file.
    Eval {
        descriptors: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Also report mean average precision.
        #[arg(long)]
        map: bool,
    },
    /// Time exact against linearized Gram matrices.
    Bench,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format { .. } | Error::InvalidArgument(_) => 1,
        Error::Config(_) => 2,
        Error::NumericFailure { .. } | Error::PreconditionViolation(_) | Error::CalibrationFailure(_) => 3,
    }
}

fn run(cli: Cli) -> Result<(serde_json::Value, bool)> {
    let mut overrides = cli.overrides;
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
        overrides.push(format!("synth.seed={seed}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    let report = match &cli.command {
        Command::Synth => commands::synth(&cfg, out)?,
        Command::Encode { input } => commands::encode(&cfg, input, out)?,
        Command::Verify => return commands::verify(&cfg),
        Command::Train { descriptors } => commands::train(&cfg, descriptors, out)?,
        Command::Eval { descriptors, model, map } => commands::eval(&cfg, descriptors, model, *map)?,
        Command::Bench => commands::bench(&cfg)?,
    };
    Ok((report, true))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((report, ok)) => {
            println!("{report:#}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
