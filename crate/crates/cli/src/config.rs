//! TOML run configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use elond::eprocess::PValueSource;
use elond::simlab::covariate::CovariateShiftScenario;
use elond::simlab::fcr::FcrScenario;
use elond::simlab::local_dep::LocalDepScenario;
use elond::simlab::sharpness::SharpnessScenario;
use elond::simlab::wor::WorScenario;
use elond::{DiscountSequence, DrawMode, Execution};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_OUT_DIR: &str = "elond-out";
pub const OUT_DIR_ENV: &str = "ELOND_OUT_DIR";

/// A fixed seed or a request for a fresh one from the OS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSpec {
    Fixed(u64),
    Random,
}

impl SeedSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("random") {
            return Ok(SeedSpec::Random);
        }
        s.parse::<u64>()
            .map(SeedSpec::Fixed)
            .with_context(|| format!("seed must be a nonnegative integer or `random`, got `{s}`"))
    }

    pub fn resolve(self) -> u64 {
        match self {
            SeedSpec::Fixed(s) => s,
            SeedSpec::Random => rand::random(),
        }
    }
}

// TOML integers are signed 64-bit, so large seeds may also be written as strings.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawSeed {
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub trials: Option<usize>,
    seed: Option<RawSeed>,
    pub out_dir: Option<PathBuf>,
    pub execution: Option<Execution>,
    /// Procedure names, e.g. `["e-lond", "lord*"]`.
    pub procedures: Option<Vec<String>>,
    /// LORD* initial wealth.
    pub w0: Option<f64>,
    pub p_value_source: Option<PValueSource>,
    pub draw_mode: Option<DrawMode>,
    pub discount: Option<DiscountSequence>,
    /// Steps at which the summary file reports FDR and power.
    pub summary_horizons: Option<Vec<usize>>,
    #[serde(default)]
    pub local_dep: LocalDepScenario,
    #[serde(default)]
    pub wor: WorScenario,
    #[serde(default)]
    pub sharpness: SharpnessScenario,
    #[serde(default)]
    pub fcr: FcrScenario,
    #[serde(default)]
    pub wcs: CovariateShiftScenario,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        // toml errors carry line and column.
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn seed(&self) -> Result<Option<SeedSpec>> {
        match &self.seed {
            None => Ok(None),
            Some(RawSeed::Int(i)) if *i >= 0 => Ok(Some(SeedSpec::Fixed(*i as u64))),
            Some(RawSeed::Int(i)) => bail!("seed must be nonnegative, got {i}"),
            Some(RawSeed::Text(s)) => SeedSpec::parse(s).map(Some),
        }
    }
}

/// Output directory: flag, then config, then `ELOND_OUT_DIR`, then the default.
pub fn resolve_out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or(file)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
