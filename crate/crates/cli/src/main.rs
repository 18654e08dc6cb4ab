//! `streamfuse`: simulate corpora, train reliability monitors, fuse streams
//! and score the result.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Failure, Settings};

#[derive(Parser)]
#[command(name = "streamfuse", version, about = "Multi-stream posterior fusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a corpus of corrupted posterior streams
    Simulate {
        /// Corpus directory to create
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Train an autoencoder monitor on the oracle streams of a corpus
    TrainAe {
        #[arg(long)]
        corpus: PathBuf,
        /// Model file to write; the loss log goes next to it
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Fuse every utterance of a corpus with one weighting method
    Fuse {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Trained monitor, required by the autoencoder method
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Decode fused and single streams and write an error report
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory of `fuse`
        #[arg(long)]
        fused: PathBuf,
        /// Report table; defaults to report.tsv in the fused directory
        #[arg(long)]
        report: Option<PathBuf>,
        /// Trained monitor, for an autoencoder sweep
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
}

fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Simulate { out, settings } => commands::simulate(&ExperimentConfig::resolve(&settings)?, &out),
        Command::TrainAe {
            corpus,
            model,
            settings,
        } => commands::train(&ExperimentConfig::resolve(&settings)?, &corpus, &model),
        Command::Fuse {
            corpus,
            out,
            model,
            settings,
        } => commands::fuse_corpus(&ExperimentConfig::resolve(&settings)?, &corpus, &out, model.as_deref()),
        Command::Evaluate {
            corpus,
            fused,
            report,
            model,
            settings,
        } => {
            let report = report.unwrap_or_else(|| fused.join("report.tsv"));
            commands::evaluate(
                &ExperimentConfig::resolve(&settings)?,
                &corpus,
                &fused,
                &report,
                model.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("streamfuse: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
