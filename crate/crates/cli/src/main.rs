//! `aai`: preprocessing, synthetic corpora, training protocols and reports.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 for
//! data and format errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "aai", version, about = "Acoustic-to-articulatory inversion toolkit")]
pub struct Cli {
    /// Overrides the seed of the synth spec or experiment configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Maximum number of runs trained concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Progress output on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Tables,
    AdaptationCurve,
    ArticulatorBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Test,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw 200 Hz EMA → 100 Hz smoothed 24-dimensional trajectories.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 13-dimensional MFCCs from the manifest's WAV files.
    Mfcc {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a synthetic corpus described by a `[synth]` spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the scheme named in an experiment configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scores a checkpoint on a manifest.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for report.json / report.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
    },
    /// Adapts leave-one-subject-out models with t% of the target's data.
    Adapt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Summary tables or plot data from a runs directory.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
