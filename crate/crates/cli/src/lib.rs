//! Command-line front end for `cefbounds`.
//!
//! Exit codes: 0 on success, 2 for invalid input (messages carry file and
//! line), 3 when the constraints admit no CEF, 1 for anything else.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod error;
pub mod format;
pub mod input;
pub mod output;

pub use error::{CliError, Result};
use input::InputKind;

#[derive(Debug, Parser)]
#[command(name = "cefbounds", about = "Bounds on conditional expectations with interval-censored regressors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pointwise bounds on E(y|x) over the support, written as x,lower,upper.
    Bounds(BoundsArgs),
    /// Bounds on one statistic of the CEF, optionally with a bootstrap
    /// confidence set.
    Stat(StatArgs),
    /// Censor a known truth, bound it under a sweep of curvature caps and
    /// report containment.
    Simulate(SimulateArgs),
    /// Fit a cubic regression spline to a reference curve and report its
    /// maximal curvature.
    Calibrate(CalibrateArgs),
    /// Bounds when the outcome is itself a binned rank, from a transition
    /// matrix of joint parent/child bin masses.
    Doublecensor(DoubleCensorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Monotone {
    Inc,
    Dec,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Closed forms; monotone bounds only.
    Analytic,
    /// Two-stage LP on a grid; monotone and/or curvature constraints.
    Numeric,
}

fn parse_limit(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "inf" | "Inf" | "infinity" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|v| *v >= 0.0 && !v.is_nan())
            .ok_or_else(|| format!("expected a non-negative number or `inf`, got {s:?}")),
    }
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected ymin,ymax, got {s:?}"))?;
    let p = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad number {t:?} in range"))
    };
    Ok((p(a)?, p(b)?))
}

/// Model flags shared by `bounds` and `stat`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Distribution of x: `uniform` on the bin support, or an `x,cdf` CSV.
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// Declared direction of the CEF.
    #[arg(long, value_enum, default_value_t = Monotone::Inc)]
    pub monotone: Monotone,
    /// Cap on |f''| in raw outcome units per squared x unit, or `inf`.
    #[arg(long, default_value = "inf", value_parser = parse_limit)]
    pub curvature: f64,
    /// Number of equal-width grid cells over the support.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Outcome range ymin,ymax.
    #[arg(long, default_value = "0,100", value_parser = parse_range, allow_hyphen_values = true)]
    pub range: (f64, f64),
    #[arg(long, value_enum, default_value_t = Engine::Numeric)]
    pub engine: Engine,
    /// Layout of the input file.
    #[arg(long, value_enum, default_value_t = InputKind::Bins)]
    pub input_kind: InputKind,
    /// Accept bin means that break the declared direction (numeric engine).
    #[arg(long)]
    pub allow_direction_violation: bool,
    /// Fail with exit code 3 when the constraints cannot reproduce the bin
    /// means exactly, instead of bounding the closest admissible CEFs.
    #[arg(long)]
    pub strict: bool,
    /// Multiply reported outcome values by this factor, e.g. 100000 for
    /// rates per 100,000. Computation stays in raw units.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Binned outcome CSV.
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Envelope CSV destination (stdout if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Summary JSON destination.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Manifest JSON destination.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatArgs {
    /// Binned outcome CSV.
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `point:x`, `mu:a,b`, `slope` or `linear:x`.
    #[arg(long)]
    pub stat: String,
    /// Number of bootstrap replicates.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nominal non-coverage of the confidence set.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Write the CEFs attaining the bounds to this CSV.
    #[arg(long)]
    pub witness: Option<PathBuf>,
    /// JSON destination (stdout if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Experiment config JSON.
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Reference curve CSV with header x,y.
    pub curve: PathBuf,
    /// Interior knots, comma separated. Defaults to quantiles of x.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub knots: Option<Vec<f64>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DoubleCensorArgs {
    /// Transition matrix CSV.
    pub matrix: PathBuf,
    /// Statistic to bound; repeat for several.
    #[arg(long = "stat", required = true)]
    pub stats: Vec<String>,
    /// Distribution of the parent rank: `uniform` or an `x,cdf` CSV.
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    /// `inc` imposes an increasing CEF; `none` drops monotonicity.
    #[arg(long, value_enum, default_value_t = Monotone::Inc)]
    pub monotone: Monotone,
    #[arg(long, default_value = "inf", value_parser = parse_limit)]
    pub curvature: f64,
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn version_line() -> String {
    format!(
        "{} (constraint semantics {})",
        env!("CARGO_PKG_VERSION"),
        cefbounds::CONSTRAINT_SEMANTICS_VERSION
    )
}

pub fn command() -> clap::Command {
    Cli::command().version(version_line())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Bounds(a) => commands::bounds(a, out),
        Command::Stat(a) => commands::stat(a, out),
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Calibrate(a) => commands::calibrate(a, out),
        Command::Doublecensor(a) => commands::doublecensor(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match command()
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
