//! `lili`: synthetic data, LILI and baseline forest estimates, grid sweeps
//! and tolerance regime checks from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "lili", version, about = "Treatment effect estimation with LILI clustering over causal forests")]
pub struct Cli {
    /// Flat `key = value` file of flag values; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with known effects.
    Synth(SynthArgs),
    /// Estimate effects with LILI clustering.
    Estimate(RunArgs),
    /// Estimate effects with the plain causal forest.
    Baseline(RunArgs),
    /// Grid search over minimum leaf size and forest size.
    Sweep(SweepArgs),
    /// Classify a tolerance function's asymptotic regime.
    Regime(RegimeArgs),
}

/// Synthetic data-generating process.
#[derive(Args, Debug, Default)]
pub struct SyntheticFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// `const:TAU` or `linear:FEATURE:INTERCEPT:SLOPE`.
    #[arg(long)]
    pub effect: Option<String>,
    /// `none` or `linear`.
    #[arg(long)]
    pub confounding: Option<String>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Add a step discontinuity to the outcome surface.
    #[arg(long)]
    pub non_lipschitz: bool,
    /// Leading binary covariates that affect nothing.
    #[arg(long)]
    pub shared_features: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synthetic: SyntheticFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct DataFlags {
    /// Input CSV; alternatively describe a synthetic dataset with `--n` and `--d`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column roles, e.g. `treatment=t,outcome=y,counterfactual=ycf,categorical=a;b,drop=c`.
    #[arg(long)]
    pub schema: Option<String>,
    #[command(flatten)]
    pub synthetic: SyntheticFlags,
}

#[derive(Args, Debug, Default)]
pub struct ForestFlags {
    /// Number of trees.
    #[arg(long)]
    pub k: Option<usize>,
    /// Minimum leaf size `l`.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Regularity `alpha`; defaults to `l / s_n`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Probability of a uniformly drawn split feature.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Subsample ratio `s_n / n`.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Split on one half of each subsample, populate leaves with the other.
    #[arg(long)]
    pub honesty: bool,
    /// `sqrt`, `const:C`, `gap:C` or `table:K=f;K=f`.
    #[arg(long)]
    pub tolerance: Option<String>,
    /// `row` or `seeded-shuffle`.
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub forest: ForestFlags,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the co-leaf count matrix: `dense` or `triplets`.
    #[arg(long)]
    pub export_counts: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub forest: ForestFlags,
    /// Comma-separated minimum leaf sizes.
    #[arg(long)]
    pub l_grid: Option<String>,
    /// Comma-separated forest sizes.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Smallest available fraction a selected configuration may have.
    #[arg(long)]
    pub min_available: Option<f64>,
    /// Record wall time per grid point (output is then not reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Select from a previously written sweep CSV instead of fitting.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RegimeArgs {
    #[arg(long)]
    pub tolerance: Option<String>,
    /// Single-tree co-leaf probability of the pair.
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated forest sizes; defaults to powers of two from 8 to 2^20.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Also write `regime.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
