//! `luria`: fit, simulate and summarize fluctuation-assay mutant counts.

mod commands;
mod error;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use luria::{GfControls, Method};

#[derive(Debug, Parser)]
#[command(name = "luria", version, about = "Luria-Delbrück mutant count analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate (alpha, rho) from a file of mutant counts.
    Fit(FitArgs),
    /// Draw a seeded LD(alpha, rho) sample, one count per line.
    Sample(SampleArgs),
    /// Counts per decade class [10^n, 10^(n+1)), with a separate zero row.
    Hist(HistArgs),
    /// Monte Carlo mean squared errors of the estimators over a parameter grid.
    Mse(MseArgs),
    /// Simulate the G/M/0 branching model, one mutant count per replicate.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gf,
    Ml,
    MlWinsor,
    P0,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gf => Method::Gf,
            MethodArg::Ml => Method::Ml,
            MethodArg::MlWinsor => Method::MlWinsor,
            MethodArg::P0 => Method::P0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Deterministic,
    Exponential,
    Gamma,
    Lognormal,
}

/// Generating-function estimator controls.
#[derive(Debug, Clone, Args)]
pub struct GfArgs {
    #[arg(long, default_value_t = 0.1)]
    z1: f64,
    #[arg(long, default_value_t = 0.9)]
    z2: f64,
    #[arg(long, default_value_t = 0.8)]
    z3: f64,
    /// Sample quantile used as the rescaling factor.
    #[arg(long, default_value_t = 0.1)]
    q: f64,
}

impl From<&GfArgs> for GfControls {
    fn from(a: &GfArgs) -> Self {
        GfControls {
            z1: a.z1,
            z2: a.z2,
            z3: a.z3,
            q: a.q,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Count file, or `-` for stdin.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Gf)]
    method: MethodArg,
    #[command(flatten)]
    gf: GfArgs,
    #[arg(long, default_value_t = 500)]
    winsor_bound: u64,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Wald test of rho equal to this value.
    #[arg(long)]
    test_rho: Option<f64>,
    /// Report alpha and its interval divided by this number of cells.
    #[arg(long)]
    total_cells: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Count file, or `-` for stdin.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
pub struct MseArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    rhos: Vec<f64>,
    /// Cultures per simulated sample.
    #[arg(long, default_value_t = 100)]
    size: usize,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gf")]
    methods: Vec<MethodArg>,
    #[command(flatten)]
    gf: GfArgs,
    #[arg(long, default_value_t = 500)]
    winsor_bound: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generation-time law of normal cells.
    #[arg(long, value_enum)]
    law: LawArg,
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    shape: Option<f64>,
    #[arg(long)]
    mu_log: Option<f64>,
    #[arg(long)]
    sigma_log: Option<f64>,
    /// Division rate of mutant cells.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Mutation probability per normal division.
    #[arg(long, conflicts_with = "alpha", required_unless_present = "alpha")]
    p: Option<f64>,
    /// Expected number of mutations; the mutation probability is calibrated to it.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n0: u64,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// For a lattice law, observe each replicate at t_end plus a uniform
    /// fraction of the lattice span.
    #[arg(long)]
    random_phase: bool,
    /// Report the total variation distance to LD(alpha, rho) on {0..kmax, tail}.
    #[arg(long)]
    tv: bool,
    #[arg(long, default_value_t = 50)]
    kmax: u64,
    /// Maximum number of divisions per replicate.
    #[arg(long, default_value_t = luria::growth::DEFAULT_DIVISION_BUDGET)]
    budget: u64,
    /// Write the JSON summary here instead of stderr.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Hist(a) => commands::hist(&a),
        Command::Mse(a) => commands::mse(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
