//! `specsmooth` command-line runner.
//!
//! Machine-readable payloads go to stdout, diagnostics to stderr. Exit codes:
//! 0 success, 1 usage or configuration error, 2 I/O error, 3 data or
//! numerical error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Environment variable overriding every output directory.
pub const OUT_DIR_ENV: &str = "SPECSMOOTH_OUT";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io {
        path: String,
        source: std::io::Error,
    },
    Core(specsmooth::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => e.exit_code() as u8,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io { path, source } => write!(f, "i/o error on {path}: {source}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<specsmooth::Error> for CliError {
    fn from(e: specsmooth::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "specsmooth", version, about = "Sequential recommendation with spectrum smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic long-tail interaction log as TSV.
    Synth(SynthArgs),
    /// Ingest a log, 5-core filter it and write a dataset bundle.
    Prepare(PrepareArgs),
    /// Train a model with early stopping on validation NDCG@10.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Train and evaluate one model per (lambda, beta) grid point.
    Sweep(SweepArgs),
    /// Re-rank top candidates with greedy determinant maximisation.
    Rerank(RerankArgs),
    /// Write singular-value curves of the item table and sequence outputs.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output TSV path.
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 1.2)]
    pub zipf: f64,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub min_len: usize,
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Interaction log: user, item, timestamp[, category] per row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// `tsv` or `csv`; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    /// The first row is a header.
    #[arg(long)]
    pub header: bool,
    /// Sequence length the bundle is padded or truncated to.
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
}

/// Model and training flags shared by `train` and `sweep`.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset bundle written by `prepare`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// `smoothing`, `cosine` or `euclidean`.
    #[arg(long)]
    pub regularizer: Option<String>,
    /// Regularise only items seen in each batch.
    #[arg(long)]
    pub batch_items: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, required = true)]
    pub seed: u64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',')]
    pub topk: Option<Vec<usize>>,
    /// Add length and popularity group tables.
    #[arg(long)]
    pub groups: bool,
    /// Also write singular-value curves as CSV.
    #[arg(long)]
    pub spectrum: bool,
    /// Only write the singular-value curves (same as `spectrum`).
    #[arg(long)]
    pub spectrum_only: bool,
    /// Exclude each user's input items from the ranking.
    #[arg(long)]
    pub mask_seen: bool,
    /// Evaluate on the validation split instead of the test split.
    #[arg(long)]
    pub valid: bool,
    /// Print the report as `metric,value` CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, required = true)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// CSV output path; defaults to `sweep.csv` in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Include per-user lists in the output.
    #[arg(long)]
    pub lists: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Rerank(a) => commands::rerank(a),
        Command::Spectrum(a) => commands::spectrum(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
