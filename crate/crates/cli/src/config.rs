use std::fmt;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::{Deserialize, Serialize};
use vista_core::augment::AugmentConfig;
use vista_core::eval::EvalConfig;
use vista_core::policy::{FeatureConfig, DEFAULT_K};
use vista_core::VistaError;

pub const DEFAULT_N: usize = 100;
pub const DEFAULT_FOV_DEG: f64 = 45.0;
pub const DEFAULT_SIZE: u32 = 256;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config values: exit code 2.
    Config(String),
    /// Filesystem or unreadable input files: exit code 3.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<VistaError> for CliError {
    fn from(e: VistaError) -> Self {
        let input_file = matches!(
            e,
            VistaError::InvalidDataset(_)
                | VistaError::InvalidPolicyFile(_)
                | VistaError::MissingProvenance(_)
        );
        if e.is_io() || input_file {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemosSection {
    pub n: usize,
    pub seed: u64,
    pub fov_deg: f64,
    pub size: u32,
    pub wrist: bool,
}

impl Default for DemosSection {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            seed: 0,
            fov_deg: DEFAULT_FOV_DEG,
            size: DEFAULT_SIZE,
            wrist: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub k: usize,
    pub features: FeatureConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            features: FeatureConfig::default(),
        }
    }
}

/// One JSON file holding any subset of the per-command sections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub gen_demos: Option<DemosSection>,
    pub augment: Option<AugmentConfig>,
    pub train: Option<TrainSection>,
    pub eval: Option<EvalConfig>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Resolves one setting: an explicit flag wins over the config file, which
/// wins over the flag's default.
pub struct Resolver<'a> {
    matches: &'a ArgMatches,
    from_file: bool,
}

impl<'a> Resolver<'a> {
    pub fn new(matches: &'a ArgMatches, from_file: bool) -> Self {
        Self { matches, from_file }
    }

    pub fn explicit(&self, id: &str) -> bool {
        self.matches.value_source(id) == Some(ValueSource::CommandLine)
    }

    pub fn pick<T>(&self, id: &str, flag: T, file: T) -> T {
        if self.from_file && !self.explicit(id) {
            file
        } else {
            flag
        }
    }
}
