//! `corrmine`: command-line front end for correlation screening.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "corrmine", version, about = "Correlation and partial-correlation screening in the fixed-n, large-p regime")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cap-area constants a_n and b_n, optionally P_n(r) with its envelopes.
    Constants(ConstantsArgs),
    /// Compound Poisson parameters: alpha, zeta, lambda, threshold and FWER.
    Params(ParamsArgs),
    /// Threshold rho for a target rate e, or the rate e implied by rho.
    Threshold(ThresholdArgs),
    /// Count statistics of a thresholded correlation graph.
    Counts(CountsArgs),
    /// Run an experiment and report count histograms per grid point.
    Simulate(RunArgs),
    /// Total-variation distances to the finite-p and limiting models.
    TvCurve(RunArgs),
    /// Empirical first and second moments against the model.
    Moments(RunArgs),
    /// Empirical family-wise error rate against 1 - exp(-lambda).
    Fwer(RunArgs),
    /// Generate a sparse dispersion matrix and report its diagnostics.
    Sparsity(SparsityArgs),
}

fn sample_size(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 4 {
        return Err("sample size must be at least 4".into());
    }
    Ok(n)
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err("must be positive and finite".into());
    }
    Ok(v)
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(0.0..1.0).contains(&v) {
        return Err("must lie in [0, 1)".into());
    }
    Ok(v)
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err("must be nonnegative and finite".into());
    }
    Ok(v)
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    /// Sample sizes (comma separated).
    #[arg(long, required = true, value_delimiter = ',', value_parser = sample_size)]
    n: Vec<usize>,
    /// Chordal cap radius for P_n(r).
    #[arg(long, value_parser = nonnegative)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
struct ParamsArgs {
    #[arg(long, value_parser = sample_size)]
    n: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    delta: u64,
    /// Rate constant; selects rho when --p is given without --rho.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    e: f64,
    /// Variable count; switches from the limiting to the finite-p model.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    p: Option<u64>,
    /// Threshold; requires --p.
    #[arg(long, requires = "p", value_parser = unit_interval)]
    rho: Option<f64>,
    /// Monte-Carlo trials when no closed form applies.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Seed for Monte-Carlo estimates.
    #[arg(long, env = "CORRMINE_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["e", "rho"]))]
struct ThresholdArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    p: u64,
    #[arg(long, value_parser = sample_size)]
    n: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    delta: u64,
    #[arg(long, value_parser = positive)]
    e: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Correlation,
    Partial,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["matrix", "data"]))]
struct CountsArgs {
    /// Symmetric matrix (correlation or partial correlation) to threshold.
    #[arg(long, value_name = "FILE")]
    matrix: Option<PathBuf>,
    /// n x p data matrix; rows are samples.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Graph to build from --data.
    #[arg(long, value_enum, default_value_t = KindArg::Correlation, requires = "data")]
    kind: KindArg,
    #[arg(long, value_parser = unit_interval)]
    rho: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    delta: u64,
    /// Also write the edge list to this file.
    #[arg(long, value_name = "FILE")]
    edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment description in TOML.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Seed governing every random draw.
    #[arg(long, env = "CORRMINE_SEED")]
    seed: u64,
    /// Override the trial count of the config.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Override the p grid of the config (comma separated).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PatternArg {
    TauKappa,
    Block,
    Diagonal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum XiRuleArg {
    Fixed,
    OverKappa,
    Spectral,
}

#[derive(Debug, Args)]
struct SparsityArgs {
    #[arg(long, value_enum, default_value_t = PatternArg::TauKappa)]
    pattern: PatternArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// Number of hub rows (block size for --pattern block).
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, default_value_t = 2)]
    kappa: usize,
    /// Off-diagonal value, or the constant of --xi-rule.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, value_enum, default_value_t = XiRuleArg::Spectral)]
    xi_rule: XiRuleArg,
    /// Sample size for the inverse local normalized determinant.
    #[arg(long, default_value_t = 10, value_parser = sample_size)]
    n: usize,
    /// Principal submatrix size for the local normalized determinant.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Write the generated matrix (CSV, or CMX1 for .cmx/.bin).
    #[arg(long, value_name = "FILE")]
    matrix_out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(corrmine::Error),
    #[error("{path}: {source}")]
    Input { path: String, source: corrmine::Error },
    #[error("{0}")]
    Output(String),
}

impl From<corrmine::Error> for CliError {
    fn from(e: corrmine::Error) -> Self {
        match e {
            corrmine::Error::InvalidParameter { .. } | corrmine::Error::Regime { .. } => CliError::Usage(e.to_string()),
            e => CliError::Library(e),
        }
    }
}

impl CliError {
    fn input(path: &std::path::Path) -> impl FnOnce(corrmine::Error) -> CliError + '_ {
        move |source| CliError::Input {
            path: path.display().to_string(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Library(_) | CliError::Input { .. } | CliError::Output(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads.into()).build_global() {
            eprintln!("corrmine: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("corrmine: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
