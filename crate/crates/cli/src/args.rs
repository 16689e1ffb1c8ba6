use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (build ", env!("SHAPECOND_BUILD_HASH"), ")");

#[derive(Debug, Parser)]
#[command(name = "shapecond", version = VERSION, about = "Shapelet-guided condensation of time-series datasets", args_override_self = true)]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SHAPECOND_THREADS", default_value_t = 1)]
    pub threads: usize,

    /// Plain `key = value` file supplying defaults for subcommand flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Skip per-series z-normalization of loaded datasets.
    #[arg(long, global = true)]
    pub no_normalize: bool,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find discriminative shapelets.
    Discover(DiscoverArgs),
    /// Train the shapelet-augmented teacher.
    Teach(TeachArgs),
    /// Synthesize a condensed set against a trained teacher.
    Synthesize(SynthesizeArgs),
    /// Train students on a condensed set and report test accuracy.
    Eval(EvalArgs),
    /// Rank an architecture grid by student accuracy.
    Grid(GridArgs),
    /// Compare fast and classical discovery by operation counts.
    Bench(BenchArgs),
    /// Write a planted-motif toy dataset.
    GenToy(GenToyArgs),
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fraction of series pruned before candidate generation and scoring.
    #[arg(long, default_value_t = 0.5)]
    pub prune: f64,
    /// Alignment half-window W.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    /// Shortest candidate (default L/8).
    #[arg(long)]
    pub lmin: Option<usize>,
    /// Longest candidate (default L/2).
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Step between candidate lengths.
    #[arg(long)]
    pub lstride: Option<usize>,
    /// Pool size.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Score against all series rather than the retained ones.
    #[arg(long)]
    pub score_full: bool,
    /// Use the classical unconstrained, unpruned search.
    #[arg(long)]
    pub reference: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TeachArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub wd: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Held-out fraction for early stopping; 0 trains on everything.
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Keep the class balance of the input as is.
    #[arg(long)]
    pub no_balance: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Real,
    Noise,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub teacher: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Pool file to load instead of the one recorded in the checkpoint.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub spc: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bn_weight: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Real)]
    pub init: InitArg,
    /// Zero the teacher's shapelet-feature weights first (ablation).
    #[arg(long)]
    pub ablate_shapelets: bool,
    /// Loss trajectory CSV.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub condensed: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Full training set; enables the full-data baseline and the ratio.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Pool for the shapelet-preservation probe (needs --train).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Number of seeded runs, starting at --seed.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridArg {
    Small,
    Full,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GridArgs {
    #[arg(long)]
    pub condensed: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum, default_value_t = GridArg::Small)]
    pub grid: GridArg,
    /// Ranking CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub prune: f64,
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    /// Single candidate length (overrides --lmin/--lmax).
    #[arg(long)]
    pub fixed_len: Option<usize>,
    #[arg(long)]
    pub lmin: Option<usize>,
    #[arg(long)]
    pub lmax: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GenToyArgs {
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 128)]
    pub len: usize,
    #[arg(long, default_value_t = 16)]
    pub motif_len: usize,
    #[arg(long, default_value_t = 4)]
    pub jitter: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 3.0)]
    pub amplitude: f64,
    /// Sidecar with the planted motif positions.
    #[arg(long)]
    pub motifs: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
