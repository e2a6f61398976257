use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tdcfdr_core::montecarlo::Level;
use tdcfdr_core::Method;

use crate::table::KeyMode;

#[derive(Debug, Parser)]
#[command(
    name = "tdcfdr",
    version,
    about = "Target-decoy FDR estimation, control and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-identification FDR estimates and running-minimum FDR as TSV.
    Estimate(EstimateArgs),
    /// Choose a score threshold and report the retained targets as JSON.
    Control(ControlArgs),
    /// Run the exhaustive enumeration checks.
    Verify(VerifyArgs),
    /// Run a Monte Carlo scenario file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Peptide,
    Spectrum,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Peptide => Level::Peptide,
            LevelArg::Spectrum => Level::Spectrum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tdc,
    Bh,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Tdc => Method::TdcPlusC,
            MethodArg::Bh => Method::BenjaminiHochberg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Theorem1,
    Theorem2,
    Theorem3,
    Lemmas,
    Martingale,
    All,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("`{s}` is not a nonnegative number")),
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("`{s}` must lie strictly between 0 and 1")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// PSM table (TSV with header spectrum_id, peptide, score, label[, truth]).
    pub input: PathBuf,
    /// Negate scores, for engines where smaller is better.
    #[arg(long)]
    pub flip_sign: bool,
    #[arg(long, value_enum, default_value_t = KeyMode::Sequence)]
    pub key: KeyMode,
    #[arg(long, value_enum, default_value_t = LevelArg::Peptide)]
    pub level: LevelArg,
    /// Decoy-to-target database size ratio.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub r: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub c: f64,
    /// Report estimates above 1 as they are instead of capping them.
    #[arg(long)]
    pub no_clamp: bool,
    /// Write the TSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ControlArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = unit_interval)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, value_parser = nonnegative)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Tdc)]
    pub method: MethodArg,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Largest number of incorrect identifications to enumerate.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=24))]
    pub max_n: Option<u64>,
    /// Random correct-score placements per n and decoy ratio.
    #[arg(long, default_value_t = 6)]
    pub placements: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    pub scenario: PathBuf,
    /// Write the results TSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
}
