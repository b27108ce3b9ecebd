//! `nuv`: binning, dissimilarity, predictions and simulations from the
//! command line.
//!
//! Exit codes: 0 success, 2 I/O or parse error, 3 infeasible parameters,
//! 4 degenerate input.

mod commands;
mod input;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nuv_core::experiments::Regime;
use nuv_core::{BinSpec, NuvError, Strategy};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<NuvError> for CliError {
    fn from(e: NuvError) -> Self {
        let code = match e {
            NuvError::Infeasible { .. } | NuvError::BinCount(_) | NuvError::IterationLimit { .. } => 3,
            NuvError::DegenerateVariance | NuvError::DegenerateModel(_) => 4,
            NuvError::InvalidInput(_) | NuvError::InvalidPartition(_) | NuvError::Config(_) => 2,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "nuv", version, about = "Normalized unexplained variance with optimized binnings")]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bin a template and report the partition.
    Bin(BinArgs),
    /// Dissimilarity of a window from a binned template.
    Nuv(NuvArgs),
    /// Evaluate a closed-form prediction of the expected dissimilarity.
    #[command(subcommand)]
    Predict(PredictCommand),
    /// Run a Monte-Carlo experiment and write trials.csv, aggregate.json and
    /// manifest.json.
    Simulate(SimulateArgs),
}

/// How to bin a template.
#[derive(Args, Clone)]
pub struct BinningArgs {
    #[arg(long, short = 's', value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// Bin count: an integer or sturges, rice, sqrt.
    #[arg(short = 'b', long = "bins", value_parser = parse_bin_spec)]
    pub bins: BinSpec,
    /// Cross-product matrix over the unique template values (greedy only).
    #[arg(long)]
    pub cross: Option<PathBuf>,
    /// Round the template to this many decimals before uniquing.
    #[arg(long)]
    pub round_digits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iterations: usize,
}

#[derive(Args)]
pub struct BinArgs {
    /// Template file: one number per line or a single-column CSV.
    pub template: PathBuf,
    #[command(flatten)]
    pub binning: BinningArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct NuvArgs {
    pub template: PathBuf,
    pub window: PathBuf,
    #[command(flatten)]
    pub binning: BinningArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand)]
pub enum PredictCommand {
    /// `(d - b) / (d - 1)`: a template against white noise.
    Noise {
        #[arg(short = 'd', long)]
        d: usize,
        #[arg(short = 'b', long = "bins")]
        b: usize,
        #[arg(long)]
        json: bool,
    },
    /// Spherical distortion on a unique-valued template, closed form.
    Corollary {
        #[arg(short = 'd', long)]
        d: usize,
        #[arg(short = 'b', long = "bins")]
        b: usize,
        #[arg(long = "sigma2m")]
        sigma2_m: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        json: bool,
    },
    /// Distortion with a given cross-product matrix.
    Distorted {
        #[arg(long)]
        template: PathBuf,
        #[command(flatten)]
        binning: BinningArgs,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        json: bool,
    },
    /// Distortion centered at the template with covariance `--cov`.
    Localized {
        #[arg(long)]
        template: PathBuf,
        #[command(flatten)]
        binning: BinningArgs,
        /// Covariance of the distortion around the template.
        #[arg(long)]
        cov: PathBuf,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        json: bool,
    },
    /// Isotropic distortion centered at a unique-valued template.
    Spherical {
        #[arg(long)]
        template: PathBuf,
        #[command(flatten)]
        binning: BinningArgs,
        #[arg(long = "sigma2m")]
        sigma2_m: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_regime)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d_min: Option<usize>,
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    pub strategies: Option<Vec<Strategy>>,
    /// Comma-separated bin specs.
    #[arg(long = "bins", value_delimiter = ',', value_parser = parse_bin_spec)]
    pub bin_specs: Option<Vec<BinSpec>>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Output directory.
    #[arg(short = 'o', long, env = "NUV_OUTPUT_DIR", default_value = "nuv-out")]
    pub output: PathBuf,
    /// No progress on standard error.
    #[arg(long, short = 'q')]
    pub quiet: bool,
    /// Print the aggregate as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: NuvError| e.to_string())
}

fn parse_bin_spec(s: &str) -> Result<BinSpec, String> {
    s.parse().map_err(|e: NuvError| e.to_string())
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: NuvError| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::parse("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::io(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Bin(args) => commands::bin(args),
        Command::Nuv(args) => commands::nuv(args),
        Command::Predict(cmd) => commands::predict(cmd),
        Command::Simulate(args) => simulate::simulate(args, cli.threads),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
