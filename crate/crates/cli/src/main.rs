//! `obygaze`: command-line driver for the annotation and evaluation pipeline.
//!
//! Exit codes: 0 success, 2 unreadable input or bad usage, 3 invariant
//! violation, 4 unmet precondition, 5 numeric divergence.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "obygaze",
    version,
    about = "Annotation fusion, agreement and concept-bottleneck evaluation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed; falls back to the config file, then OBY_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project spans onto clips and merge annotators.
    Fuse(FuseArgs),
    /// Merged level counts over several overlap thresholds.
    Sweep(SweepArgs),
    /// γ agreement per film and annotator pair.
    Gamma(GammaArgs),
    /// Level and concept distributions.
    Stats(StatsArgs),
    /// Fit the eight concept activation vectors.
    Cav(CavArgs),
    /// Concept-bottleneck tree and logistic regression.
    Pcbm(PcbmArgs),
    /// Train/test grid of one model, optionally leaving movies out.
    Eval(EvalArgs),
    /// Error-factor regression on per-clip predictions.
    Error(ErrorArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub clips: PathBuf,
    /// Minimum overlap fraction, in (0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// `clip` or `span`.
    #[arg(long)]
    pub basis: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub clips: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub basis: Option<String>,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    /// Projection files (JSON Lines, one annotator per label).
    #[arg(long, required = true, num_args = 1..)]
    pub projections: Vec<PathBuf>,
    #[arg(long)]
    pub n_null: Option<usize>,
    /// Levels to exclude, or `none`.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Merged labels.
    #[arg(long)]
    pub labels: PathBuf,
    /// Per-annotator projections, for the per-annotator trend.
    #[arg(long)]
    pub projections: Option<PathBuf>,
    /// Levels dropped from the task fractions, or `none` (default NS).
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CavArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// `en-only` or `en-plus-without`.
    #[arg(long)]
    pub negatives: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Vec<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PcbmArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Model document written by `cav`.
    #[arg(long)]
    pub cavs: PathBuf,
    /// `dt`, `lr`, or both.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Levels shown in the tree rendering.
    #[arg(long)]
    pub report_depth: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// CAV document; required by the PCBM models.
    #[arg(long)]
    pub cavs: Option<PathBuf>,
    /// `mlp`, `pcbm-dt`, `pcbm-lr`, `all-positive` or `coin-flip`.
    #[arg(long)]
    pub model: Option<String>,
    /// Training negatives (`EN`, `HN`); default both.
    #[arg(long, value_delimiter = ',')]
    pub train: Vec<String>,
    /// Test negatives (`EN`, `EN+HN`); default both.
    #[arg(long, value_delimiter = ',')]
    pub test: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Also hold out each film in turn.
    #[arg(long)]
    pub leave_movies_out: bool,
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// CSV with `clip_id` and `prediction` columns.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `default`, `linear-oracle`, `entangled`, `hn-failure` or `independent-failure`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub films: Option<usize>,
    #[arg(long)]
    pub clips_per_film: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Embedding encoding: `bin` or `csv`.
    #[arg(long)]
    pub format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("obygaze: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
