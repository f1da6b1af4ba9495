//! `schwarz-rand`: run incremental subspace correction experiments, check the
//! expected-error bounds and compute smoothness-class norms.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<schwarz_rand::Error> for CliError {
    fn from(e: schwarz_rand::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "schwarz-rand", version, about)]
struct Cli {
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true, env = "SCHWARZ_RAND_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the expected squared error curve and write CSV and JSON output.
    Run(RunArgs),
    /// Run verification suites, or check the bounds for one configuration.
    Verify(VerifyArgs),
    /// Print the smoothness-class norms of the configured target or of a vector.
    Norms(NormsArgs),
    /// Cross-product sweep over s, beta, sigma and weight skew; one summary row each.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    /// Run Monte Carlo on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite name or `all`; ignored with `--config`.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Check the bounds for this configuration instead of running suites.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Machine-readable report.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct NormsArgs {
    #[arg(long)]
    config: PathBuf,
    /// JSON array with the coefficients of the vector; the configured target otherwise.
    #[arg(long)]
    vector: Option<PathBuf>,
    /// Smoothness indices for the `H^s_L` norms.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
    s: Vec<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Ratios of geometric weights.
    #[arg(long, value_delimiter = ',')]
    skew: Vec<f64>,
    /// CSV goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the parallel feature; ignoring {n} threads");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => commands::run(a, cli.threads),
        Command::Verify(a) => commands::verify(a, cli.threads),
        Command::Norms(a) => commands::norms(a),
        Command::Sweep(a) => commands::sweep(a, cli.threads),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
