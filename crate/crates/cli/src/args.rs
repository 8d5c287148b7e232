use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wbary", version, about = "Wasserstein barycenters with certified saddle-point solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one barycenter problem and write report.csv, barycenter.csv and iterates.csv.
    Barycenter(BarycenterArgs),
    /// Print the duality gap of a saved iterates.csv.
    Gap(GapArgs),
    /// Run all three algorithms on the Gaussian suite.
    GaussianBench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Mp,
    De,
    Ibp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Printed,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThetaArg {
    Paper,
    Exact,
}

/// Flags shared by every solver run.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Target duality gap.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Cap on iterations (outer iterations for de, scaling iterations for ibp).
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Divide the cost by its largest entry.
    #[arg(long)]
    pub normalize_cost: bool,
    /// IBP entropic regularization.
    #[arg(long, default_value_t = 1e-2)]
    pub reg: f64,
    /// Log-domain IBP.
    #[arg(long)]
    pub stabilized: bool,
    /// Mirror prox step scaling.
    #[arg(long, value_enum, default_value_t = ScalingArg::Derived)]
    pub scaling: ScalingArg,
    /// Regularizer range bound for dual extrapolation.
    #[arg(long, value_enum, default_value_t = ThetaArg::Exact)]
    pub theta: ThetaArg,
    /// Start each dual-extrapolation prox solve from the previous solution.
    #[arg(long)]
    pub warm_start: bool,
    /// Record every this many iterations.
    #[arg(long)]
    pub log_stride: Option<usize>,
    /// Keep iterating after the certificate reaches the target.
    #[arg(long)]
    pub no_early_exit: bool,
    /// Leave the elapsed_seconds column empty so output depends only on inputs.
    #[arg(long)]
    pub no_timing: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BarycenterArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// CSV with one histogram per row.
    #[arg(long, conflicts_with = "gaussian", required_unless_present = "gaussian")]
    pub input: Option<PathBuf>,
    /// Rescale input rows to unit mass.
    #[arg(long, requires = "input")]
    pub normalize: bool,
    /// Use the Gaussian suite instead of a file.
    #[arg(long)]
    pub gaussian: bool,
    /// Seed of the Gaussian suite.
    #[arg(long, default_value_t = 0, requires = "gaussian")]
    pub seed: u64,
    /// `sqdist` (squared distance between support points) or `csv:<path>`.
    #[arg(long, default_value = "sqdist")]
    pub cost: String,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long)]
    pub iterates: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
}
