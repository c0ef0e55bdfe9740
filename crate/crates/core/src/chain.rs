//! Denoise chains: ordered compositions of in-process and external stages.
//!
//! External stages are shell commands that read `{in}` and write `{out}`,
//! both WAV files. Chain ids join stage names with `+` (`"dm+le"` runs
//! `dm` first); `"noisy"` is the empty chain.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioBuffer, AudioError, CANONICAL_RATE_HZ};
use crate::dsp::{self, DspError, GateParams};
use crate::process::{self, ProcessError};

pub const NOISY_CHAIN_ID: &str = "noisy";

/// Chain ids available without any configuration (external ones still need
/// their stage commands defined before they can run).
pub const BUILTIN_CHAIN_IDS: [&str; 7] = ["noisy", "sg", "le", "mg", "dm", "le+dm", "dm+le"];

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("stage `{stage}` failed ({status}): {diagnostics}")]
    StageFailed {
        stage: String,
        status: String,
        diagnostics: String,
    },
    #[error("stage `{stage}` produced missing output {}", path.display())]
    MissingOutput { stage: String, path: PathBuf },
    #[error("stage `{stage}` timed out after {seconds}s")]
    Timeout { stage: String, seconds: u64 },
    #[error("stage `{stage}`: {source}")]
    Process {
        stage: String,
        #[source]
        source: ProcessError,
    },
    #[error("stage `{stage}` audio: {source}")]
    Audio {
        stage: String,
        #[source]
        source: AudioError,
    },
    #[error("stage `{stage}`: {source}")]
    Dsp {
        stage: String,
        #[source]
        source: DspError,
    },
    #[error("invalid stage `{stage}`: {reason}")]
    InvalidStage { stage: String, reason: String },
    #[error("unknown stage `{stage}` in chain `{chain}`")]
    UnknownStage { chain: String, stage: String },
    #[error("unknown chain `{0}`")]
    UnknownChain(String),
    #[error("duplicate chain id `{0}`")]
    DuplicateChain(String),
    #[error("workdir {}: {source}", path.display())]
    Workdir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn default_timeout() -> u64 {
    600
}

/// A denoiser wrapped as a file-to-file shell command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalStage {
    pub name: String,
    pub command_template: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    /// Rate of the WAV handed to the command; its output may use any rate.
    #[serde(default = "canonical_rate")]
    pub expected_sample_rate: u32,
}

fn canonical_rate() -> u32 {
    CANONICAL_RATE_HZ
}

impl ExternalStage {
    pub fn validate(&self) -> Result<(), ChainError> {
        let invalid = |reason: String| ChainError::InvalidStage {
            stage: self.name.clone(),
            reason,
        };
        if self.name.is_empty() || self.name.contains('+') {
            return Err(invalid("name must be non-empty and not contain '+'".into()));
        }
        if self.timeout_seconds == 0 {
            return Err(invalid("timeout_seconds must be positive".into()));
        }
        if self.expected_sample_rate < audio_io::MIN_TARGET_RATE_HZ {
            return Err(invalid(format!(
                "expected_sample_rate {} is too low",
                self.expected_sample_rate
            )));
        }
        process::check_placeholders(&self.command_template, &["{in}", "{out}"]).map_err(invalid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserStage {
    SpectralGate(GateParams),
    LineEnhancement,
    External(ExternalStage),
}

impl DenoiserStage {
    pub fn name(&self) -> &str {
        match self {
            DenoiserStage::SpectralGate(_) => "sg",
            DenoiserStage::LineEnhancement => "le",
            DenoiserStage::External(s) => &s.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseChain {
    pub id: String,
    pub stages: Vec<DenoiserStage>,
}

impl DenoiseChain {
    pub fn identity(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            stages: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }
}

/// A custom chain declared in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub id: String,
    pub stages: Vec<String>,
}

/// Stage and chain definitions by name.
#[derive(Debug, Clone)]
pub struct ChainRegistry {
    gate: GateParams,
    external: BTreeMap<String, ExternalStage>,
    chains: BTreeMap<String, Vec<String>>,
}

impl Default for ChainRegistry {
    fn default() -> Self {
        Self::new(GateParams::default())
    }
}

impl ChainRegistry {
    pub fn new(gate: GateParams) -> Self {
        let chains = BUILTIN_CHAIN_IDS
            .iter()
            .map(|id| (id.to_string(), split_chain_id(id)))
            .collect();
        Self {
            gate,
            external: BTreeMap::new(),
            chains,
        }
    }

    pub fn add_stage(&mut self, stage: ExternalStage) -> Result<(), ChainError> {
        stage.validate()?;
        if matches!(stage.name.as_str(), "sg" | "le" | NOISY_CHAIN_ID) {
            return Err(ChainError::InvalidStage {
                stage: stage.name.clone(),
                reason: "name is reserved for a native stage".into(),
            });
        }
        self.external.insert(stage.name.clone(), stage);
        Ok(())
    }

    pub fn add_chain(&mut self, spec: ChainSpec) -> Result<(), ChainError> {
        if self.chains.contains_key(&spec.id) {
            return Err(ChainError::DuplicateChain(spec.id));
        }
        self.chains.insert(spec.id, spec.stages);
        Ok(())
    }

    pub fn chain_ids(&self) -> impl Iterator<Item = &str> {
        self.chains.keys().map(String::as_str)
    }

    /// Look up a chain. Unregistered ids of the form `a+b` are accepted when
    /// every part names a known stage.
    pub fn resolve(&self, id: &str) -> Result<DenoiseChain, ChainError> {
        let names = match self.chains.get(id) {
            Some(names) => names.clone(),
            None if !id.is_empty() => split_chain_id(id),
            None => return Err(ChainError::UnknownChain(id.to_owned())),
        };
        let stages = names
            .iter()
            .map(|name| match name.as_str() {
                "sg" => Ok(DenoiserStage::SpectralGate(self.gate)),
                "le" => Ok(DenoiserStage::LineEnhancement),
                other => self
                    .external
                    .get(other)
                    .cloned()
                    .map(DenoiserStage::External)
                    .ok_or_else(|| ChainError::UnknownStage {
                        chain: id.to_owned(),
                        stage: other.to_owned(),
                    }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DenoiseChain {
            id: id.to_owned(),
            stages,
        })
    }
}

fn split_chain_id(id: &str) -> Vec<String> {
    if id == NOISY_CHAIN_ID {
        return Vec::new();
    }
    id.split('+').map(|s| s.trim().to_owned()).collect()
}

/// Run one external stage. Any stale `out_path` is removed first so a
/// command that writes nothing cannot pass with an old file.
pub fn run_external_stage(stage: &ExternalStage, in_path: &Path, out_path: &Path) -> Result<(), ChainError> {
    stage.validate()?;
    if out_path.exists() {
        std::fs::remove_file(out_path).map_err(|source| ChainError::Workdir {
            path: out_path.to_path_buf(),
            source,
        })?;
    }
    let command =
        process::render_template(&stage.command_template, &[("{in}", in_path), ("{out}", out_path)]);
    let out = match process::run_shell(&command, Duration::from_secs(stage.timeout_seconds)) {
        Ok(out) => out,
        Err(ProcessError::Timeout { seconds, .. }) => {
            return Err(ChainError::Timeout {
                stage: stage.name.clone(),
                seconds,
            })
        }
        Err(source) => {
            return Err(ChainError::Process {
                stage: stage.name.clone(),
                source,
            })
        }
    };
    if !out.status.success() {
        return Err(ChainError::StageFailed {
            stage: stage.name.clone(),
            status: out.status.to_string(),
            diagnostics: out.diagnostics(),
        });
    }
    if !out_path.is_file() {
        return Err(ChainError::MissingOutput {
            stage: stage.name.clone(),
            path: out_path.to_path_buf(),
        });
    }
    let bytes = std::fs::read(out_path).map_err(|source| ChainError::Workdir {
        path: out_path.to_path_buf(),
        source,
    })?;
    audio_io::decode_wav_bytes(&bytes).map_err(|source| ChainError::Audio {
        stage: stage.name.clone(),
        source,
    })?;
    Ok(())
}

/// Apply every stage in order. The result is always at the canonical rate.
pub fn apply_chain(chain: &DenoiseChain, input: &AudioBuffer, workdir: &Path) -> Result<AudioBuffer, ChainError> {
    let mut current = input.clone();
    for (idx, stage) in chain.stages.iter().enumerate() {
        let to_canonical = |buf: &AudioBuffer| {
            audio_io::resample(buf, CANONICAL_RATE_HZ).map_err(|source| ChainError::Audio {
                stage: stage.name().to_owned(),
                source,
            })
        };
        current = match stage {
            DenoiserStage::SpectralGate(params) => {
                dsp::spectral_gate(&to_canonical(&current)?, params).map_err(|source| ChainError::Dsp {
                    stage: stage.name().to_owned(),
                    source,
                })?
            }
            DenoiserStage::LineEnhancement => {
                dsp::line_enhancement(&to_canonical(&current)?).map_err(|source| ChainError::Dsp {
                    stage: stage.name().to_owned(),
                    source,
                })?
            }
            DenoiserStage::External(ext) => {
                std::fs::create_dir_all(workdir).map_err(|source| ChainError::Workdir {
                    path: workdir.to_path_buf(),
                    source,
                })?;
                let in_path = workdir.join(format!("stage{idx}_{}_in.wav", ext.name));
                let out_path = workdir.join(format!("stage{idx}_{}_out.wav", ext.name));
                let audio_err = |source| ChainError::Audio {
                    stage: ext.name.clone(),
                    source,
                };
                let staged = audio_io::resample(&current, ext.expected_sample_rate).map_err(audio_err)?;
                audio_io::write_wav(&staged, &in_path).map_err(audio_err)?;
                run_external_stage(ext, &in_path, &out_path)?;
                let result = audio_io::load_wav(&out_path).map_err(audio_err)?;
                let _ = std::fs::remove_file(&in_path);
                let _ = std::fs::remove_file(&out_path);
                result
            }
        };
    }
    Ok(current)
}
