//! `puzzlegen`: batch generation, seed validation and corpus passes.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "puzzlegen", version, about = "Generate solver-verified puzzle corpora from declarative specs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared generation knobs.
#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Full-instance resamples per output slot.
    #[arg(long, default_value_t = puzzlegen_core::pipeline::RETRY_BUDGET)]
    pub retry_budget: usize,
    /// Per-solve wall-clock budget in milliseconds; 0 disables it.
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a batch of instances as JSONL.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON map from qtype to wrapper template; adds a `prompt` field.
        #[arg(long)]
        wrappers: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Rebuild an instance from a config, optionally checking it against a gold answer.
    Reproduce {
        /// Spec to render with; may be a text-only variant of the original.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Gold answers: a JSON object keyed by query name, or plain text for a single query.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Original spec, when `--spec` is a rephrased variant.
        #[arg(long)]
        original: Option<PathBuf>,
        /// Variables to redraw instead of reading them from the config.
        #[arg(long, value_delimiter = ',')]
        randomize: Vec<String>,
        /// Seed for redrawn variables.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the instance record here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop logically equivalent instances, keeping first occurrences.
    Dedup {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Specs used to re-check canonical configs on digest matches.
        #[arg(long = "spec")]
        specs: Vec<PathBuf>,
    },
    /// Compute corpus-relative difficulty scores.
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hist: PathBuf,
    },
    /// Split a scored corpus into test, SFT, RL-validation and RL-training sets.
    Partition {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Grade predicted answers against gold records.
    Grade {
        /// JSONL lines `{"id": ..., "answer": ...}`.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unique-instance count as generation proceeds.
    Saturation {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Curve sampling interval.
        #[arg(long, default_value_t = 100)]
        every: usize,
        #[command(flatten)]
        gen: GenArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    commands::check_solver()?;
    match cli.command {
        Command::Generate { spec, count, seed, out, wrappers, gen } => {
            commands::generate(&spec, count, seed, &out, wrappers.as_deref(), &gen)
        }
        Command::Reproduce { spec, config, gold, original, randomize, seed, out } => commands::reproduce(
            &spec,
            &config,
            gold.as_deref(),
            original.as_deref(),
            &randomize,
            seed,
            out.as_deref(),
        ),
        Command::Dedup { inputs, out, report, specs } => commands::dedup(&inputs, &out, &report, &specs),
        Command::Score { input, out, hist } => commands::score(&input, &out, &hist),
        Command::Partition { input, seed, out_dir } => commands::partition(&input, seed, &out_dir),
        Command::Grade { pred, gold, out } => commands::grade(&pred, &gold, &out),
        Command::Saturation { spec, count, seed, out, every, gen } => {
            commands::saturation(&spec, count, seed, &out, every, &gen)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.class(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(e.exit_code())
        }
    }
}
