//! TOML run configuration.
//!
//! A config file mirrors the command line: a `[model]` section plus one
//! optional section per subcommand. Flags passed on the command line always
//! override config values. Every file must declare the schema it was written
//! against via `spec_version = 1` so that stale configs fail loudly instead
//! of being misread.

use std::path::Path;

use serde::Deserialize;

use chanalyze::model::ModelConfig;
use chanalyze::{Error, Result};

/// Schema version accepted by this binary (also echoed in JSON reports).
pub const SPEC_VERSION: i64 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Mandatory in a file; `None` only for the built-in empty config.
    pub spec_version: Option<i64>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub model: Option<ModelConfig>,
    pub analyze: Option<AnalyzeSection>,
    pub resonances: Option<ResonancesSection>,
    pub normalform: Option<NormalformSection>,
    pub simulate: Option<SimulateSection>,
    pub geometry: Option<GeometrySection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub energy: Option<f64>,
    pub order: Option<usize>,
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonancesSection {
    pub grid: Option<String>,
    pub energy: Option<f64>,
    pub mmax: Option<u32>,
    pub tol: Option<f64>,
    pub budget: Option<usize>,
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalformSection {
    pub energy: Option<f64>,
    pub order: Option<u32>,
    pub rmax: Option<f64>,
    pub levels: Option<usize>,
    pub samples: Option<usize>,
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub energy: Option<f64>,
    pub t0: Option<f64>,
    pub tmax: Option<f64>,
    pub shoot: Option<bool>,
    pub amplitude: Option<f64>,
    pub order: Option<u32>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// `spiral`, `alpha-check`, or `homogenize` (the flag form wins).
    pub mode: Option<String>,
    pub energy: Option<f64>,
    pub field: Option<String>,
    pub dim: Option<usize>,
    pub samples: Option<usize>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
}

/// Read and validate a config file; `None` yields the empty defaults.
pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
    })?;
    let cfg: FileConfig = toml::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
    match cfg.spec_version {
        Some(SPEC_VERSION) => Ok(cfg),
        Some(v) => Err(Error::InvalidInput(format!(
            "config {}: unsupported spec_version {v} (this binary reads version {SPEC_VERSION})",
            path.display()
        ))),
        None => Err(Error::InvalidInput(format!(
            "config {}: missing required key spec_version (= {SPEC_VERSION})",
            path.display()
        ))),
    }
}

/// Uniform error for a setting that is absent both as a flag and in the
/// config file.
pub fn missing(command: &str, key: &str) -> Error {
    Error::InvalidInput(format!(
        "{command} needs `{key}`: pass --{key} or set [{command}].{key} in the config"
    ))
}
