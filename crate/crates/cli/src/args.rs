use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use probcast_core::harness::{default_grid, EpsilonChoice, RidgeChoice, SynthKind};
use probcast_core::Kernel;

#[derive(Debug, Parser)]
#[command(name = "probcast", version, about = "Online multi-class probability forecasting under the Brier loss")]
pub struct Cli {
    /// More log output (repeatable); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm over one series and report its test-segment scores.
    Forecast(ForecastArgs),
    /// Run every algorithm and the simple baseline over one series.
    Bench(BenchArgs),
    /// Check the loss bounds on random and adversarial streams.
    VerifyBounds(VerifyArgs),
    /// Print the labeled stream built from a series.
    Label(LabelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Caar,
    Maar,
    Kaar,
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    Dot,
    Rbf,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthName {
    Ar1,
    Sine,
    Walk,
}

impl SynthName {
    pub fn kind(self) -> SynthKind {
        match self {
            SynthName::Ar1 => SynthKind::ar1(),
            SynthName::Sine => SynthKind::sine(),
            SynthName::Walk => SynthKind::walk(),
        }
    }
}

/// `grid`, a comma-separated list, or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeArg(pub RidgeChoice);

impl FromStr for RidgeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let positive = |v: &str| -> Result<f64, String> {
            let x: f64 = v.trim().parse().map_err(|_| format!("not a number: {v:?}"))?;
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(format!("ridge must be positive, got {x}"))
            }
        };
        if s == "grid" {
            return Ok(Self(RidgeChoice::Grid(default_grid())));
        }
        if s.contains(',') {
            let grid = s.split(',').map(positive).collect::<Result<Vec<_>, _>>()?;
            return Ok(Self(RidgeChoice::Grid(grid)));
        }
        Ok(Self(RidgeChoice::Fixed(positive(s)?)))
    }
}

/// `auto` or a non-negative value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonArg(pub EpsilonChoice);

impl FromStr for EpsilonArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self(EpsilonChoice::Auto));
        }
        let e: f64 = s.parse().map_err(|_| format!("expected `auto` or a number, got {s:?}"))?;
        if e >= 0.0 && e.is_finite() {
            Ok(Self(EpsilonChoice::Value(e)))
        } else {
            Err(format!("epsilon must be >= 0, got {e}"))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelName::Rbf)]
    pub kernel: KernelName,
    /// Width of the rbf kernel.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Degree of the polynomial kernel.
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Additive offset of the polynomial kernel.
    #[arg(long, default_value_t = 1.0)]
    pub offset: f64,
}

impl KernelArgs {
    pub fn kernel(&self) -> probcast_core::Result<Kernel> {
        match self.kernel {
            KernelName::Dot => Ok(Kernel::Dot),
            KernelName::Rbf => Kernel::rbf(self.sigma),
            KernelName::Poly => Kernel::poly(self.degree, self.offset),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    /// CSV file with one observation per line (header optional).
    #[arg(long, conflicts_with = "synth")]
    pub input: Option<PathBuf>,
    /// Generate a synthetic series instead of reading one.
    #[arg(long, value_enum, required_unless_present = "input")]
    pub synth: Option<SynthName>,
    /// Length of the synthetic series.
    #[arg(long, default_value_t = 3000)]
    pub length: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Observations per signal.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Tube half-width, or `auto` for the median absolute change.
    #[arg(long, default_value = "auto")]
    pub epsilon: EpsilonArg,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// A value, a comma-separated grid, or `grid` for 1e-3..1e3 by decades.
    #[arg(long, default_value = "grid")]
    pub ridge: RidgeArg,
    /// Directory for report.csv, report.txt and run_log.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write zero for wall-clock times so reruns are byte-identical.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[arg(long, value_enum, default_value_t = Algo::Maar)]
    pub algo: Algo,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Algorithms to run, in report order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "caar,maar,kaar,simple")]
    pub algos: Vec<Algo>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Random streams.
    #[arg(long, default_value_t = 200)]
    pub streams: usize,
    /// Greedy adversarial streams.
    #[arg(long, default_value_t = 20)]
    pub adversarial: usize,
    /// Longest stream.
    #[arg(long, default_value_t = 300)]
    pub length: usize,
    /// Signal dimension.
    #[arg(long, default_value_t = 3)]
    pub dims: usize,
    /// Number of classes.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 1.0)]
    pub ridge: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Directory for bound_reports.csv and bound_reports.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
