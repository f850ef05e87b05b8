//! Command-line flags, the TOML config file, and their merge.
//!
//! Every setting resolves as flag, then file, then built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use delsub::bounds::{BoundsConfig, GammaVariant, LogBase, TVariant};
use delsub::oracles::EnumerationCaps;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "delsub", version, about = "Bounds, oracles and experiments for deletion/substitution channels")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub t_variant: Option<TVariantArg>,
    #[arg(long, global = true, value_enum)]
    pub gamma_variant: Option<GammaVariantArg>,
    #[arg(long, global = true, value_enum)]
    pub log_base: Option<LogBaseArg>,
    /// TOML file with the same settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sweep the capacity bounds over a parameter grid.
    Bounds(BoundsArgs),
    /// Run the exhaustive small-n oracle suite.
    Verify(VerifyArgs),
    /// Exhaustive decoding of a random codebook against the fixed-count ceiling.
    Decode(DecodeArgs),
    /// Monte Carlo check of the Chernoff interval.
    Concentration(ConcentrationArgs),
    /// Compare the one-stage channel with its two-stage construction.
    Decompose(DecomposeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TVariantArg {
    Proof,
    Statement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaVariantArg {
    Single,
    PerProcess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
pub enum LogBaseArg {
    #[serde(rename = "mixed")]
    Mixed,
    #[value(name = "all-2")]
    #[serde(rename = "all-2")]
    All2,
}

#[derive(Args, Debug, Default)]
pub struct BoundsArgs {
    #[arg(long, value_delimiter = ',')]
    pub pd: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Largest n for the collision, confusable-count and guesser suites.
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub qd_max: Option<usize>,
    #[arg(long)]
    pub qs_max: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub s_max: Option<usize>,
    /// Largest n for the (t,s)-bad suite.
    #[arg(long)]
    pub ts_n_max: Option<usize>,
    #[arg(long)]
    pub ts_qs_max: Option<usize>,
    #[arg(long)]
    pub ts_s_max: Option<usize>,
    /// Random codebooks in the guesser suite.
    #[arg(long)]
    pub codebooks: Option<usize>,
    /// Sample this many ordered pattern pairs per collision config instead of all.
    #[arg(long)]
    pub collision_samples: Option<u64>,
    /// Divide the confusable-count bound by 2^k before comparing.
    #[arg(long, hide = true)]
    pub lemma2_bound_shift: Option<u32>,
}

#[derive(Args, Debug, Default)]
pub struct DecodeArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub qd: Option<usize>,
    #[arg(long)]
    pub qs: Option<usize>,
    /// Codebook size N.
    #[arg(long)]
    pub codebook_size: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Per-trial CSV log.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ConcentrationArgs {
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub pd: Option<f64>,
    #[arg(long)]
    pub ps: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub t_variant: Option<TVariantArg>,
    pub gamma_variant: Option<GammaVariantArg>,
    pub log_base: Option<LogBaseArg>,
    #[serde(default)]
    pub bounds: BoundsFile,
    #[serde(default)]
    pub verify: VerifyFile,
    #[serde(default)]
    pub decode: DecodeFile,
    #[serde(default)]
    pub concentration: ConcentrationFile,
    #[serde(default)]
    pub decompose: DecomposeFile,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub pd: Option<Vec<f64>>,
    pub ps: Option<Vec<f64>>,
    pub n: Option<Vec<u64>>,
    pub delta: Option<Vec<f64>>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub qd_max: Option<usize>,
    pub qs_max: Option<usize>,
    pub t_max: Option<usize>,
    pub s_max: Option<usize>,
    pub ts_n_max: Option<usize>,
    pub ts_qs_max: Option<usize>,
    pub ts_s_max: Option<usize>,
    pub codebooks: Option<usize>,
    pub collision_samples: Option<u64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct DecodeFile {
    pub n: Option<usize>,
    pub qd: Option<usize>,
    pub qs: Option<usize>,
    pub codebook_size: Option<u64>,
    pub trials: Option<u64>,
    pub trials_out: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationFile {
    pub n: Option<u64>,
    pub p: Option<f64>,
    pub trials: Option<u64>,
    pub delta: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct DecomposeFile {
    pub n: Option<usize>,
    pub pd: Option<f64>,
    pub ps: Option<f64>,
    pub trials: Option<u64>,
}

pub fn load_file(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Settings shared by every subcommand after the merge.
#[derive(Clone, Debug)]
pub struct Common {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub bounds: BoundsConfig,
    pub caps: EnumerationCaps,
    pub decode_cap: usize,
}

fn env_usize(name: &str, default: usize) -> Result<usize, CliError> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{name}={v:?} is not a non-negative integer"))),
        Err(_) => Ok(default),
    }
}

pub fn resolve_common(args: &CommonArgs, file: &FileConfig) -> Result<Common, CliError> {
    let t_variant = match args.t_variant.or(file.t_variant).unwrap_or(TVariantArg::Proof) {
        TVariantArg::Proof => TVariant::Proof,
        TVariantArg::Statement => TVariant::Statement,
    };
    let gamma_variant = match args.gamma_variant.or(file.gamma_variant).unwrap_or(GammaVariantArg::Single) {
        GammaVariantArg::Single => GammaVariant::Single,
        GammaVariantArg::PerProcess => GammaVariant::PerProcess,
    };
    let log_base = match args.log_base.or(file.log_base).unwrap_or(LogBaseArg::Mixed) {
        LogBaseArg::Mixed => LogBase::Mixed,
        LogBaseArg::All2 => LogBase::AllBase2,
    };
    let defaults = EnumerationCaps::default();
    let caps = EnumerationCaps {
        scan_n: env_usize("DELSUB_SCAN_CAP", defaults.scan_n)?,
        pair_scan_n: env_usize("DELSUB_PAIR_CAP", defaults.pair_scan_n)?,
        pair_scan_cost: defaults.pair_scan_cost,
    };
    let jobs = args.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    Ok(Common {
        seed: args.seed.or(file.seed).unwrap_or(0),
        out: args.out.clone().or_else(|| file.out.clone()),
        jobs,
        bounds: BoundsConfig {
            t_variant,
            gamma_variant,
            log_base,
        },
        caps,
        decode_cap: env_usize("DELSUB_DECODE_CAP", delsub::experiments::DEFAULT_DECODE_CAP)?,
    })
}
