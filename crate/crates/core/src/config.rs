//! Run configuration, loaded from TOML or JSON.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asr::{AsrBackend, AsrError};
use crate::chain::{ChainError, ChainRegistry, ChainSpec, ExternalStage};
use crate::dsp::{DspError, GateParams, StftParams};
use crate::intelligibility::ScoreMode;
use crate::textnorm::NormalizationConfig;
use crate::threshold::{DEFAULT_EPSILON_WER_POINTS, DEFAULT_GRID_SIZE, DEFAULT_VALIDATION_FRACTION};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("duplicate backend id `{0}`")]
    DuplicateBackend(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error(transparent)]
    Backend(#[from] AsrError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON_WER_POINTS
}
fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}
fn default_fraction() -> f64 {
    DEFAULT_VALIDATION_FRACTION
}
fn default_cache_dir() -> PathBuf {
    PathBuf::from(".selden-cache")
}
fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
fn default_group_attribute() -> String {
    "gender".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub backends: Vec<AsrBackend>,
    /// External denoiser commands, referenced by name from chain ids.
    #[serde(default)]
    pub stages: Vec<ExternalStage>,
    /// Extra chains beyond the built-in ids.
    #[serde(default)]
    pub chains: Vec<ChainSpec>,
    /// Chains compared by `benchmark`; empty means every chain that resolves.
    #[serde(default)]
    pub benchmark_chains: Vec<String>,
    #[serde(default)]
    pub stft: StftParams,
    #[serde(default)]
    pub gate: GateParams,
    #[serde(default)]
    pub normalization: NormalizationConfig,
    #[serde(default)]
    pub score_mode: ScoreMode,
    #[serde(default = "default_epsilon")]
    pub epsilon_wer_points: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Relative paths are taken relative to the config file.
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_group_attribute")]
    pub group_attribute: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backends: Vec::new(),
            stages: Vec::new(),
            chains: Vec::new(),
            benchmark_chains: Vec::new(),
            stft: StftParams::default(),
            gate: GateParams::default(),
            normalization: NormalizationConfig::default(),
            score_mode: ScoreMode::default(),
            epsilon_wer_points: default_epsilon(),
            grid_size: default_grid_size(),
            validation_fraction: default_fraction(),
            seed: 0,
            cache_dir: default_cache_dir(),
            workers: default_workers(),
            group_attribute: default_group_attribute(),
        }
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+'))
        && !id.starts_with('.')
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut config: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        if config.cache_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.cache_dir = base.join(&config.cache_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return invalid(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if !(self.epsilon_wer_points.is_finite() && self.epsilon_wer_points >= 0.0) {
            return invalid("epsilon_wer_points must be finite and non-negative".into());
        }
        if self.grid_size < 2 {
            return invalid("grid_size must be at least 2".into());
        }
        if self.workers == 0 {
            return invalid("workers must be positive".into());
        }
        if self.group_attribute.trim().is_empty() {
            return invalid("group_attribute must not be empty".into());
        }
        self.stft.validate()?;
        self.gate.validate()?;
        let mut ids = BTreeSet::new();
        for b in &self.backends {
            b.validate()?;
            if !valid_id(&b.id) {
                return invalid(format!("backend id `{}` has unsupported characters", b.id));
            }
            if !ids.insert(b.id.as_str()) {
                return Err(ConfigError::DuplicateBackend(b.id.clone()));
            }
        }
        for c in &self.chains {
            if !valid_id(&c.id) {
                return invalid(format!("chain id `{}` has unsupported characters", c.id));
            }
        }
        let registry = self.registry()?;
        for id in &self.benchmark_chains {
            registry.resolve(id)?;
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<ChainRegistry, ChainError> {
        let mut registry = ChainRegistry::new(self.gate);
        for stage in &self.stages {
            registry.add_stage(stage.clone())?;
        }
        for chain in &self.chains {
            registry.add_chain(chain.clone())?;
        }
        Ok(registry)
    }

    pub fn backend(&self, id: &str) -> Result<&AsrBackend, ConfigError> {
        self.backends
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| ConfigError::UnknownBackend(id.to_owned()))
    }
}
