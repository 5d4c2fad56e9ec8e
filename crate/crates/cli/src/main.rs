mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Stochastic six-vertex model on a strip: sampling, exact stationary laws,
/// matrix-product weights and Askey-Wilson asymptotics.
#[derive(Debug, Parser)]
#[command(name = "strip6v", version)]
pub struct Cli {
    /// TOML file whose keys mirror flag names; `[subcommand]` tables apply
    /// to one subcommand. Explicit flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trajectories of the particle system on a path.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Sample the two-species coupling of two ordered parameter sets.
    #[command(args_override_self = true)]
    Couple(CoupleArgs),
    /// Exact stationary law from the transition matrix.
    #[command(args_override_self = true)]
    Stationary(StationaryArgs),
    /// Stationary law from the matrix product ansatz.
    #[command(args_override_self = true)]
    Mpa(MpaArgs),
    /// Compare the strip stationary law with the tilted open-ASEP law.
    #[command(args_override_self = true)]
    VerifyTilting(VerifyTiltingArgs),
    /// Convergence of the rescaled strip kernel to the ASEP generator.
    #[command(args_override_self = true)]
    ScalingCheck(ScalingArgs),
    /// Atoms and masses of an Askey-Wilson measure.
    #[command(args_override_self = true)]
    AwMeasure(AwMeasureArgs),
    /// Partition function Z_N(t) on the horizontal path.
    #[command(args_override_self = true)]
    Partition(PartitionArgs),
    /// Mean particle density on the horizontal path.
    #[command(args_override_self = true)]
    Density(DensityArgs),
    /// Phase labels and densities over a grid of (A, C).
    #[command(args_override_self = true)]
    PhaseSweep(PhaseSweepArgs),
}

/// Either the six vertex weights or the boundary parameterization
/// `(q, r, A, B, C, D)`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "A")]
    pub big_a: Option<f64>,
    #[arg(long = "B", allow_negative_numbers = true)]
    pub big_b: Option<f64>,
    #[arg(long = "C")]
    pub big_c: Option<f64>,
    #[arg(long = "D", allow_negative_numbers = true)]
    pub big_d: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    /// Path width; implies the horizontal path when --path is absent.
    #[arg(long)]
    pub n: Option<usize>,
    /// Path literal over {U, R}, e.g. URU.
    #[arg(long)]
    pub path: Option<String>,
    /// Height of the right endpoint; defaults to the number of U labels.
    #[arg(long)]
    pub anchor: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub path: PathArgs,
    /// Initial configuration as a 0/1 string; defaults to empty.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    /// Trajectory CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    /// Parameters of the lower copy.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Upper-copy `a`; defaults to the lower value.
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub d2: Option<f64>,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long)]
    pub init1: Option<String>,
    #[arg(long)]
    pub init2: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub path: PathArgs,
    /// Largest width allowed for exact enumeration.
    #[arg(long, default_value_t = strip6v::exact::DEFAULT_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MpaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub path: PathArgs,
    /// Also write the derived parameters as JSON.
    #[arg(long)]
    pub derived: Option<PathBuf>,
    /// Report the deviation from the exact stationary law.
    #[arg(long)]
    pub compare: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyTiltingArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub delta: f64,
    /// Left jump rate.
    #[arg(long = "L")]
    pub l: f64,
    /// Right jump rate.
    #[arg(long = "R", default_value_t = 1.0)]
    pub r: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4])]
    pub eps: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AwMeasureArgs {
    #[arg(long = "A", allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long = "B", allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long = "C", allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long = "D", allow_negative_numbers = true)]
    pub d: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub q: f64,
    /// Accept parameters within 1e-9 of an atom threshold.
    #[arg(long)]
    pub lenient: bool,
    /// Also write the continuous density sampled at this many points of [-1, 1].
    #[arg(long)]
    pub density_points: Option<usize>,
    #[arg(long)]
    pub density_out: Option<PathBuf>,
    #[arg(long, env = "S6V_PRECISION", default_value_t = 1e-10)]
    pub precision: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated list of widths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub t: Vec<f64>,
    /// Add the matrix-product evaluation and its relative difference.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, env = "S6V_PRECISION", default_value_t = 1e-10)]
    pub precision: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, env = "S6V_PRECISION", default_value_t = 1e-10)]
    pub precision: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhaseSweepArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 0.4)]
    pub q: f64,
    #[arg(long = "B", allow_negative_numbers = true, default_value_t = -0.1)]
    pub b: f64,
    #[arg(long = "D", allow_negative_numbers = true, default_value_t = -0.1)]
    pub d: f64,
    /// Grid size as `<points in A>x<points in C>`.
    #[arg(long, default_value = "50x50")]
    pub grid: String,
    /// Upper end of the A axis; defaults to 2/sqrt(r).
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Upper end of the C axis; defaults to 2 sqrt(r).
    #[arg(long)]
    pub c_max: Option<f64>,
    /// Largest width for density columns.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Widths for density columns; defaults to --nmax alone.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, env = "S6V_PRECISION", default_value_t = 1e-10)]
    pub precision: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match commands::run(cli.command) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
