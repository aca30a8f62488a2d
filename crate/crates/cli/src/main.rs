//! `combfit`: descriptive statistics, fitting, simulation, bootstrap
//! intervals, rank-correlation bounds, the zero-mixed benchmark and timing
//! runs for zero-inflated multivariate claim series.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use combfit::Error;

#[derive(Parser, Debug)]
#[command(name = "combfit", version, about = "Zero-inflated multivariate claim modelling with a Gaussian copula")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Counts, shares and co-jump tables of a claim file.
    Stats(DataArgs),
    /// Two-stage fit: marginals in closed form, then the copula correlation.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Also write the fitted model for `simulate`.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Simulate claim rows from a model file.
    Simulate {
        /// Model JSON: {"marginals": [{"p", "mu", "sigma"}], "correlation": [[...]]}.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[command(flatten)]
        out: OutputArgs,
        #[command(flatten)]
        seed: SeedArgs,
    },
    /// Fit, then parametric bootstrap intervals for the correlations.
    Bootstrap {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long = "replicas", short = 'B', default_value_t = 1000)]
        replicas: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Report per-parameter intervals instead of Bonferroni-adjusted ones.
        #[arg(long)]
        no_bonferroni: bool,
        /// Also bootstrap the marginal parameters.
        #[arg(long)]
        marginals: bool,
    },
    /// Spearman correlation bounds over tie-breaking for every column pair.
    Spearman(DataArgs),
    /// Zero-mixed benchmark: per-pattern probabilities and copulas.
    ZeroMixed(DataArgs),
    /// Time the copula simulator against the subset-process simulator.
    Bench {
        /// Increasing list of dimensions.
        #[arg(long, value_delimiter = ',', default_value = "2,3,5,10,20,50,100")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 5000)]
        rows: usize,
        /// Horizon of the subset processes, in periods.
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        /// Subset processes are skipped above this dimension.
        #[arg(long, default_value_t = 12)]
        levy_max_dim: usize,
        #[arg(long, value_enum, default_value_t = Family::T)]
        copula: Family,
        /// Degrees of freedom of the Student-t copula.
        #[arg(long, default_value_t = 4.0)]
        nu: f64,
        /// Write the full report as JSON instead of the CSV table.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        out: OutputArgs,
        #[command(flatten)]
        seed: SeedArgs,
    },
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug, Clone)]
struct SeedArgs {
    #[arg(long, env = "COMBFIT_SEED")]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = UnitArg::Millions)]
    unit: UnitArg,
    /// Comma-separated claim columns to keep.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    #[command(flatten)]
    seed: SeedArgs,
    /// Absolute tolerance of multivariate normal probabilities.
    #[arg(long, default_value_t = 1e-7)]
    mvn_tol: f64,
    /// Optimizer runs; the first starts from the rank-correlation estimate.
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 4000)]
    max_iter: usize,
    /// Simplex size at which the optimizer stops, in angle units.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum UnitArg {
    Dkk,
    Millions,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Gaussian,
    T,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn not_converged(message: impl Into<String>) -> Self {
        Self {
            code: 5,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::Io(_) | Error::Parameter(_) => 2,
            Error::Domain(_) | Error::Shape(_) | Error::InsufficientPositives { .. } => 3,
            Error::Factorization { .. }
            | Error::LikelihoodUnderflow { .. }
            | Error::BootstrapUnstable { .. }
            | Error::SamplerStarved { .. } => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
