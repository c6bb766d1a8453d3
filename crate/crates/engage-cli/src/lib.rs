//! Command-line surface of the engagement framework.
//!
//! Subcommands cover the full workflow: `simulate` writes a synthetic
//! hand-off corpus, `train` fits the one-vs-rest SVM, `classify` exports
//! per-frame results for one stream, `evaluate` scores a model on the
//! test split, `aggregate` folds result files into team snapshots,
//! `bench` checks the per-frame latency budget, and `run-all` chains the
//! whole thing under one seed.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 failed gate.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

use config::AppConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config; exit 1.
    Usage(String),
    /// Unreadable or inconsistent inputs; exit 2.
    Data(String),
    /// A check ran and failed; exit 3.
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Gate(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Gate(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

/// Flags shared by every subcommand, applied over built-in defaults in
/// the order config file, then individual flags.
#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Config file with `key = value` lines ('#' comments allowed).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for simulation and training.
    #[arg(long)]
    pub seed: Option<u64>,
    /// State repertoire: three_state (default) or six_state.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Classifier threshold override, repeatable (e.g. lean_fwd_deg=9).
    #[arg(long = "threshold", value_name = "KEY=VALUE")]
    pub thresholds: Vec<String>,
}

#[derive(Debug, Parser)]
#[command(
    name = "engage",
    version,
    about = "Engagement classification from skeleton-joint streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic hand-off corpus and its split manifest.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for streams/ and manifest.txt.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the one-vs-rest SVM on a manifest's training split.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Output model file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Classify one stream, exporting per-frame results.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        stream: PathBuf,
        /// Output results file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score a model on a manifest's test split, both scoring modes.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Directory for report.json and report.txt (stdout only if absent).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Fold per-participant result files into team snapshots.
    Aggregate {
        #[command(flatten)]
        common: CommonArgs,
        /// Per-frame results file, repeatable (one per participant).
        #[arg(long = "results", value_name = "FILE", required = true)]
        results: Vec<PathBuf>,
        /// Output snapshots file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Replay a stream and check the per-frame latency budget.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        stream: PathBuf,
        /// Replay count; latency samples pool across repetitions.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Print the distribution but never fail the gate.
        #[arg(long)]
        no_gate: bool,
    },
    /// simulate + train + evaluate + aggregate in one deterministic pass.
    RunAll {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for all artifacts.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate { common, .. }
            | Command::Train { common, .. }
            | Command::Classify { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Aggregate { common, .. }
            | Command::Bench { common, .. }
            | Command::RunAll { common, .. } => common,
        }
    }
}

/// Resolves the three configuration layers for one invocation.
pub fn resolve_config(common: &CommonArgs) -> Result<AppConfig, CliError> {
    let mut config = AppConfig::default();
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    if let Some(mode) = &common.mode {
        config
            .set("mode", mode)
            .map_err(CliError::Usage)?;
    }
    for pair in &common.thresholds {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--threshold expects KEY=VALUE, got {pair:?}"))
        })?;
        config
            .pipeline
            .thresholds
            .set(key.trim(), value.trim())
            .map_err(|reason| CliError::Usage(format!("--threshold {pair:?}: {reason}")))?;
    }
    config.dataset.window_frames = config.pipeline.thresholds.window_frames;
    Ok(config)
}

/// Runs one parsed invocation, returning the stdout payload.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let config = resolve_config(cli.command.common())?;
    match &cli.command {
        Command::Simulate { out, .. } => commands::simulate(&config, out),
        Command::Train { manifest, out, .. } => commands::train(&config, manifest, out),
        Command::Classify {
            model, stream, out, ..
        } => commands::classify(&config, model, stream, out),
        Command::Evaluate {
            manifest,
            model,
            out,
            ..
        } => commands::evaluate(&config, manifest, model, out.as_deref()),
        Command::Aggregate { results, out, .. } => commands::aggregate(&config, results, out),
        Command::Bench {
            model,
            stream,
            repetitions,
            no_gate,
            ..
        } => {
            let repetitions = repetitions.unwrap_or(config.bench_repetitions);
            let outcome = commands::bench(&config, model, stream, repetitions)?;
            if !outcome.gate_passed && !no_gate {
                // The distribution still belongs on stdout; the dispatch
                // layer prints the message of a Gate error there too.
                return Err(CliError::Gate(format!(
                    "{}bench: latency gate failed",
                    outcome.text
                )));
            }
            Ok(outcome.text)
        }
        Command::RunAll { out, .. } => commands::run_all(&config, out),
    }
}
