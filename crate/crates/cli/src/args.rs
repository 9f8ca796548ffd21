use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "axcal",
    version,
    about = "Calibration error-resilience analysis and two-core accelerator modelling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic calibration problem file.
    Gen(GenArgs),
    /// Run the calibration kernel on a problem file.
    Calibrate(CalibrateArgs),
    /// Sweep the error-injection parameter grid and map quality acceptance.
    Resilience(ResilienceArgs),
    /// Explore truncation candidates for the approximate core.
    Dse(DseArgs),
    /// Evaluate the two-core energy-savings arithmetic.
    Energy(EnergyArgs),
}

/// Flags left unset fall back to the `--config` file, then to defaults.
#[derive(Debug, Args)]
pub struct GenArgs {
    /// Antenna count P.
    #[arg(short = 'P', long)]
    pub antennas: Option<usize>,
    /// Gain magnitude spread around 1.
    #[arg(long)]
    pub gain_spread: Option<f64>,
    /// Hermitian noise scale added to the measured covariances.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Number of point sources in the model covariance.
    #[arg(long)]
    pub rank: Option<usize>,
    /// RNG seed (required; all randomness flows from it).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output problem file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also export the problem as CSV next to the binary file.
    #[arg(long)]
    pub csv: bool,
    /// TOML config file supplying defaults for unset flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendKind {
    /// Double-precision reference.
    Ref,
    /// Fixed-point accurate core.
    Acc,
    /// Fixed-point approximate core (truncated).
    Ax,
    /// Approximate core for the first n-ax iterations, accurate afterwards.
    Hetero,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Input problem file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Arithmetic backend.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Approximate-iteration count for the hetero backend.
    #[arg(long)]
    pub n_ax: Option<usize>,
    /// Convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Disable the even-iteration averaging step.
    #[arg(long)]
    pub no_even_averaging: bool,
    /// Reference trace (trace.json of an earlier run) for diff_rel and
    /// quality acceptance.
    #[arg(long)]
    pub ref_trace: Option<PathBuf>,
    /// Datapath description (TOML) overriding the built-in accurate core.
    #[arg(long)]
    pub datapath: Option<PathBuf>,
    /// Datapath description (TOML) overriding the built-in approximate core.
    #[arg(long)]
    pub datapath_ax: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResilienceArgs {
    /// Input problem file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Error-mean axis, `start:step:stop` or a single value.
    #[arg(long)]
    pub em: Option<String>,
    /// Error-predictability axis.
    #[arg(long)]
    pub ep: Option<String>,
    /// Error-rate axis (percent of iterations).
    #[arg(long)]
    pub er: Option<String>,
    /// Approximate-iteration budget axis; `inf` for the unlimited
    /// (plain statistical) model.
    #[arg(long)]
    pub nax: Option<String>,
    /// Unit of the budget axis values.
    #[arg(long, value_enum)]
    pub nax_unit: Option<NaxUnit>,
    /// Trials per grid point.
    #[arg(long)]
    pub trials: Option<u32>,
    /// Kernel sites receiving injection (comma-separated from z,mac,sac).
    #[arg(long)]
    pub sites: Option<String>,
    /// Error rate at which the frontier is reported.
    #[arg(long)]
    pub er_fixed: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Base RNG seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = rayon default). Results are independent of this.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NaxUnit {
    /// Percent of the reference run's iteration count.
    Percent,
    /// Absolute iteration counts.
    Iterations,
}

#[derive(Debug, Args)]
pub struct DseArgs {
    /// Input problem file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Candidate truncation vectors: CSV with header
    /// h,t,e_sac,f_sac,e_mac,f_mac.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Accurate-core power anchor (mW).
    #[arg(long)]
    pub p_acc: Option<f64>,
    /// Power at the anchor truncation level (mW).
    #[arg(long)]
    pub anchor_power: Option<f64>,
    /// Total truncated bits of the power anchor.
    #[arg(long)]
    pub anchor_bits: Option<u32>,
    /// Datapath description (TOML) for the accurate base core.
    #[arg(long)]
    pub datapath: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Worker threads (0 = rayon default). Results are independent of this.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Accurate-core power (mW).
    pub p_acc: f64,
    /// Approximate-core power (mW).
    pub p_ax: f64,
    /// Total iteration count.
    pub n_acc: u64,
    /// Approximate iteration count.
    pub n_ax: u64,
    /// Optional JSON output path (manifest written alongside).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
