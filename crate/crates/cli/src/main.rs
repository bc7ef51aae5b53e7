//! `selfid` command line: generate synthetic memory streams, train the
//! low-rank recognizer, verify the self-possession conditions, and
//! compute corpus metrics.
//!
//! Exit codes: 0 success (and verdict true), 1 verdict false, 2 usage,
//! config or input error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or malformed input data: exit 2.
    Config(String),
    Input(String),
    /// Failure while executing a well-formed command: exit 3.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Input(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "selfid", version, about = "Memory-space continuum, belief and recognizer-training pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset, labels and manifest.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the adapter on the generated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check both self-possession conditions against a checkpoint.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two response corpora (JSON lines).
    Textmetrics {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long, default_value_t = 30)]
        top_n: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Aggregate prior outputs into one report.json.
    Report {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Generate { config, out } => commands::cmd_generate(config, out),
        Command::Train { config, out } => commands::cmd_train(config, out),
        Command::Verify {
            config,
            checkpoint,
            out,
        } => commands::cmd_verify(config, checkpoint, out),
        Command::Textmetrics {
            before,
            after,
            top_n,
            out,
        } => commands::cmd_textmetrics(before, after, *top_n, out),
        Command::Report { out } => commands::cmd_report(out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
