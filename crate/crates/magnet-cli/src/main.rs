//! Single binary exposing every workflow: estimation, path selection,
//! stability selection, screening, interpretation, simulation, benchmarks,
//! and recovery-condition diagnostics.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or format error, 3
//! numerical failure. Every failure also emits one machine-readable JSON
//! line on stderr.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use magnet_core::simgen::{GraphKind, Regime};

/// Bumped whenever any output file changes shape.
pub const FORMAT_SCHEMA: u32 = 1;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (format schema 1)");

#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation beyond what clap can catch (e.g. a flag value
    /// that is syntactically fine but semantically impossible).
    Usage(String),
    /// Unreadable or malformed input files.
    Input(String),
    Core(magnet_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Core(e) => match e {
                magnet_core::Error::NonPositiveDefinite { .. }
                | magnet_core::Error::StepSizeFloor { .. }
                | magnet_core::Error::InfeasibleDual { .. }
                | magnet_core::Error::DegenerateResidual { .. }
                | magnet_core::Error::RankDeficientDesign
                | magnet_core::Error::ReplicateFailures { .. } => 3,
                _ => 2,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "usage",
            2 => "input",
            _ => "numerical",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Input(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

impl From<magnet_core::Error> for CliError {
    fn from(e: magnet_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn emit_json_error(code: u8, kind: &str, message: &str) {
    let payload = serde_json::json!({
        "error": { "code": code, "kind": kind, "message": message }
    });
    eprintln!("{payload}");
}

#[derive(Parser)]
#[command(
    name = "magnet",
    version = VERSION,
    about = "Markov networks over nodes with vector-valued attributes",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one penalized precision matrix from a covariance file.
    Estimate(EstimateArgs),
    /// Fit a descending penalty path from data and pick the BIC best.
    Path(PathArgs),
    /// Keep edges that persist across row subsamples at a fixed penalty.
    Stability(StabilityArgs),
    /// Split a covariance into independent components at a penalty level.
    Screen(ScreenArgs),
    /// Per-edge partial canonical correlations, weights, and classes.
    Interpret(InterpretArgs),
    /// Draw a synthetic ground-truth model and a sample from it.
    Simulate(SimulateArgs),
    /// Recovery benchmark over a rescaled-sample-size grid.
    Bench(BenchArgs),
    /// Recovery-condition diagnostics for a known precision matrix.
    Theory(TheoryArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Chain,
    Nn,
}

impl KindArg {
    fn to_core(self) -> GraphKind {
        match self {
            KindArg::Chain => GraphKind::Chain,
            KindArg::Nn => GraphKind::NearestNeighbor,
        }
    }

    fn label(self) -> &'static str {
        match self {
            KindArg::Chain => "chain",
            KindArg::Nn => "nn",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Full,
    Diagonal,
    ZeroDiagonal,
    UniformRandom,
}

impl RegimeArg {
    fn to_core(self) -> Regime {
        match self {
            RegimeArg::Full => Regime::Full,
            RegimeArg::Diagonal => Regime::Diagonal,
            RegimeArg::ZeroDiagonal => Regime::ZeroDiagonal,
            RegimeArg::UniformRandom => Regime::UniformRandom,
        }
    }

    fn label(self) -> &'static str {
        match self {
            RegimeArg::Full => "full",
            RegimeArg::Diagonal => "diagonal",
            RegimeArg::ZeroDiagonal => "zero-diagonal",
            RegimeArg::UniformRandom => "uniform-random",
        }
    }
}

/// Solver knobs shared by every fitting subcommand.
#[derive(Args)]
struct SolverArgs {
    /// Duality-gap tolerance.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Cap on full passes over the nodes per solve.
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> magnet_core::solver::SolverConfig {
        magnet_core::solver::SolverConfig::new(lambda)
            .with_epsilon(self.epsilon)
            .with_max_sweeps(self.max_sweeps)
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("penalty").required(true).args(["lambda", "grid"]))]
struct EstimateArgs {
    /// Covariance matrix CSV (dense, row-major).
    #[arg(long, value_name = "FILE")]
    cov: PathBuf,
    /// Layout JSON: {"attr_counts": [k_1, ..., k_p]}.
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    /// Penalty level (exactly one of --lambda and --grid).
    #[arg(long)]
    lambda: Option<f64>,
    /// Fit a log-spaced path of this many penalties and keep the BIC best;
    /// requires --n for the BIC sample-size term.
    #[arg(long, requires = "n")]
    grid: Option<usize>,
    /// Sample count behind the covariance.
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PathArgs {
    /// Data CSV, one sample per row.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    /// Parallel 0/1 observation mask; switches to the pairwise
    /// available-case estimator (which ignores --center).
    #[arg(long, value_name = "FILE")]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    grid_size: usize,
    /// Subtract column means before the covariance.
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    center: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    #[arg(long, value_name = "FILE")]
    mask: Option<PathBuf>,
    /// Penalty level; omitted, the BIC-best penalty of a full-data path.
    #[arg(long)]
    lambda: Option<f64>,
    /// Grid resolution for the BIC pre-selection when --lambda is absent.
    #[arg(long, default_value_t = 30)]
    grid_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Fraction of rows kept per subsample, drawn without replacement.
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    /// Minimum appearance count for a stable edge.
    #[arg(long, default_value_t = 95)]
    threshold: usize,
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    center: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long, value_name = "FILE")]
    cov: PathBuf,
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct InterpretArgs {
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    /// Estimated edge list (node_a,node_b,... rows; extra columns ignored).
    #[arg(long, value_name = "FILE")]
    edges: PathBuf,
    /// Designated attribute for edge classification; omitted, no classes.
    #[arg(long)]
    attr_index: Option<usize>,
    /// Squared-weight band edge for the classification rule.
    #[arg(long, default_value_t = 0.25)]
    threshold: f64,
    /// Ridge added to the blanket regression when it is rank deficient.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Node count.
    #[arg(long)]
    p: usize,
    /// Attributes per node.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = RegimeArg::Full)]
    regime: RegimeArg,
    /// Rescaled sample size; n = ceil(theta s^2 k^2 ln(pk)) with s the
    /// maximum truth degree.
    #[arg(long)]
    theta: f64,
    /// Explicit sample count; overrides --theta for n.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum, default_value_t = RegimeArg::Full)]
    regime: RegimeArg,
    /// Node counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    p: Vec<usize>,
    /// Attribute counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    k: Vec<usize>,
    /// Rescaled sample sizes, comma separated, ascending.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,13,16")]
    thetas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 30)]
    grid_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Extra first-attribute-only sample fractions (e.g. 0.1,0.3,0.5);
    /// switches to the partial-observation protocol.
    #[arg(long, value_delimiter = ',')]
    extra_fractions: Option<Vec<f64>>,
    #[arg(long, value_name = "FILE", default_value = "bench.csv")]
    out: PathBuf,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    emit_gnuplot: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TheoryArgs {
    /// Ground-truth precision matrix CSV.
    #[arg(long, value_name = "FILE")]
    precision: PathBuf,
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    /// Failure-probability exponent (p^{-tau + 2}).
    #[arg(long, default_value_t = 3.0)]
    tau: f64,
    /// Sub-Gaussian scale; 0.5 fits a standard Gaussian.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Sample count; enables the penalty recommendation and sample bound.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            emit_json_error(1, "usage", &err.to_string());
            return ExitCode::from(1);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_json_error(e.exit_code(), e.kind(), &e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
