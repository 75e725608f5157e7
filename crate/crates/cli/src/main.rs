//! `esac`: changepoint detection, calibration and simulation from the shell.

mod bench;
mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use esac_core::{Error, NEff, Regime, Variant};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration mismatch: {0}")]
    Mismatch(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(Error),
}

impl CliError {
    /// Classifies a core error raised while ingesting user data.
    pub fn from_input(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::TooShort { .. } | Error::NoSeries | Error::Ragged { .. } => {
                CliError::Parse(e.to_string())
            }
            other => other.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Degenerate(_) => 4,
            CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::TableMismatch(_) | Error::MismatchedN { .. } => CliError::Mismatch(e.to_string()),
            Error::DegenerateSeries { .. } => CliError::Degenerate(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "esac", version, about = "Sparsity-adaptive multiple changepoint detection")]
struct Cli {
    /// Master seed for every random draw; 0 unless given, or taken from a
    /// simulation config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect all changepoints in a CSV panel.
    Detect(DetectArgs),
    /// Locate a single change over the whole sample.
    EstimateSingle(SingleArgs),
    /// Print the seeded intervals as JSON lines.
    Intervals(IntervalArgs),
    /// Monte Carlo calibration of the testing penalty.
    Calibrate(CalibrateArgs),
    /// Run a simulation experiment, or write one simulated panel.
    Simulate(SimulateArgs),
    /// Time detection on null data over a grid of sizes.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    Trim,
    Split,
    Midpoint,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Trim => Variant::Trimming,
            VariantArg::Split => Variant::SplitAtEstimate,
            VariantArg::Midpoint => Variant::MidpointTest,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum NEffArg {
    N4,
    N,
}

impl From<NEffArg> for NEff {
    fn from(v: NEffArg) -> Self {
        match v {
            NEffArg::N4 => NEff::N4,
            NEffArg::N => NEff::N,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    /// Growth factor between seeded interval lengths.
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// Intervals per length are spaced len / K apart.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Split)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = NEffArg::N4)]
    pub n_eff: NEffArg,
    /// Skip MAD normalization of each series.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// CSV file: one row per time point, one column per series.
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// `analytic`, or the path of a calibrated penalty file.
    #[arg(long, default_value = "analytic")]
    pub penalty: String,
    /// Keep only the most significant changes.
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SingleArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NEffArg::N4)]
    pub n_eff: NEffArg,
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Args, Debug)]
pub struct IntervalArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Take `n` and `p` from this CSV instead of the flags.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, required_unless_present = "input")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "input")]
    pub p: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Target false positive probability.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Number of Monte Carlo null draws.
    #[arg(long, default_value_t = 1000)]
    pub mc_n: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum DesignArg {
    Single,
    Multiple,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum RegimeArg {
    Sparse,
    Dense,
    Mixed,
}

impl From<RegimeArg> for Regime {
    fn from(v: RegimeArg) -> Self {
        match v {
            RegimeArg::Sparse => Regime::Sparse,
            RegimeArg::Dense => Regime::Dense,
            RegimeArg::Mixed => Regime::Mixed,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Experiment config as JSON; overrides the design flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DesignArg::Single)]
    pub design: DesignArg,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    /// Change location of the single design.
    #[arg(long, default_value_t = 40)]
    pub eta: usize,
    /// Sparsity of the single design.
    #[arg(long, default_value_t = 1)]
    pub sparsity: usize,
    /// Number of changes of the multiple design.
    #[arg(long, default_value_t = 2)]
    pub j: usize,
    #[arg(long, value_enum, default_value_t = RegimeArg::Sparse)]
    pub regime: RegimeArg,
    /// Signal constant relative to the rate.
    #[arg(long, default_value_t = 6.25)]
    pub c: f64,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Calibrate the testing penalty by Monte Carlo instead of `lambda_tilde`.
    #[arg(long)]
    pub calibrated: bool,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub mc_n: usize,
    /// Record per-replicate wall-clock times.
    #[arg(long)]
    pub timing: bool,
    /// Also print the summary table to stderr.
    #[arg(long)]
    pub table: bool,
    /// Write one simulated panel here instead of running the experiment.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Replicate index used with `--data`.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Sample sizes swept at the base dimension.
    #[arg(long, value_delimiter = ',', default_values_t = [256, 512, 1024])]
    pub ns: Vec<usize>,
    /// Dimensions swept at the base sample size.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256])]
    pub ps: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    pub base_n: usize,
    #[arg(long, default_value_t = 64)]
    pub base_p: usize,
    /// Timed runs per cell; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    let seed = cli.seed;
    let fixed = seed.unwrap_or(0);
    pool.install(|| match cli.command {
        Command::Detect(a) => commands::detect(&a, fixed),
        Command::EstimateSingle(a) => commands::estimate_single(&a, fixed),
        Command::Intervals(a) => commands::intervals(&a),
        Command::Calibrate(a) => commands::calibrate(&a, fixed),
        Command::Simulate(a) => commands::simulate(&a, seed),
        Command::Bench(a) => bench::run(&a, fixed),
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
            eprintln!("esac: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
