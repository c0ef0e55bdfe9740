//! External ASR engines behind a command contract, plus a content-addressed
//! transcript cache.
//!
//! A backend command receives the audio path through `{in}` and prints the
//! transcript on stdout. Cache entries are keyed by backend id, chain id and
//! the SHA-256 of the WAV bytes that were actually transcribed.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::process::{self, ProcessError};

pub const CACHE_FILE_NAME: &str = "transcripts.jsonl";

#[derive(Debug, Error)]
pub enum AsrError {
    #[error("invalid backend `{id}`: {reason}")]
    InvalidBackend { id: String, reason: String },
    #[error("audio file not found: {0}")]
    MissingAudio(PathBuf),
    #[error("backend `{backend}` exited with {status}: {diagnostics}")]
    Failed {
        backend: String,
        status: String,
        diagnostics: String,
    },
    #[error("backend `{backend}` produced non-UTF-8 output")]
    Undecodable { backend: String },
    #[error("backend `{backend}`: {source}")]
    Process {
        backend: String,
        #[source]
        source: ProcessError,
    },
    #[error("cache i/o on {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Anything that turns an audio file into text.
pub trait Transcriber: Send + Sync {
    fn id(&self) -> &str;
    fn transcribe(&self, audio_path: &Path) -> Result<String, AsrError>;
}

fn default_timeout() -> u64 {
    600
}

/// ASR engine invoked as `sh -c <command_template>` with `{in}` replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsrBackend {
    pub id: String,
    pub command_template: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    #[serde(default)]
    pub description: String,
}

impl AsrBackend {
    pub fn new(id: impl Into<String>, command_template: impl Into<String>) -> Result<Self, AsrError> {
        let backend = Self {
            id: id.into(),
            command_template: command_template.into(),
            timeout_seconds: default_timeout(),
            description: String::new(),
        };
        backend.validate()?;
        Ok(backend)
    }

    pub fn validate(&self) -> Result<(), AsrError> {
        if self.id.trim().is_empty() {
            return Err(AsrError::InvalidBackend {
                id: self.id.clone(),
                reason: "empty id".into(),
            });
        }
        if self.timeout_seconds == 0 {
            return Err(AsrError::InvalidBackend {
                id: self.id.clone(),
                reason: "timeout_seconds must be positive".into(),
            });
        }
        process::check_placeholders(&self.command_template, &["{in}"]).map_err(|reason| {
            AsrError::InvalidBackend {
                id: self.id.clone(),
                reason,
            }
        })
    }
}

impl Transcriber for AsrBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn transcribe(&self, audio_path: &Path) -> Result<String, AsrError> {
        if !audio_path.is_file() {
            return Err(AsrError::MissingAudio(audio_path.to_path_buf()));
        }
        let command = process::render_template(&self.command_template, &[("{in}", audio_path)]);
        let out = process::run_shell(&command, Duration::from_secs(self.timeout_seconds))
            .map_err(|source| AsrError::Process {
                backend: self.id.clone(),
                source,
            })?;
        if !out.status.success() {
            return Err(AsrError::Failed {
                backend: self.id.clone(),
                status: out.status.to_string(),
                diagnostics: out.diagnostics(),
            });
        }
        let text = String::from_utf8(out.stdout).map_err(|_| AsrError::Undecodable {
            backend: self.id.clone(),
        })?;
        Ok(text.trim_end().to_owned())
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(hash_bytes(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub sample_id: String,
    pub backend_id: String,
    pub chain_id: String,
    pub audio_hash: String,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    backend_id: String,
    chain_id: String,
    audio_hash: String,
    sample_id: String,
    text: String,
    created_at: String,
}

type CacheKey = (String, String, String);

/// Transcript cache backed by an append-only JSONL file.
///
/// The file is read once on open (later lines override earlier ones, bad
/// lines are skipped with a warning); new entries are appended through a
/// single locked writer.
pub struct TranscriptCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<CacheKey, TranscriptRecord>>,
    writer: Mutex<Option<File>>,
    in_flight: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
    backend_calls: AtomicUsize,
}

impl TranscriptCache {
    /// Cache that lives only as long as the process.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
            in_flight: Mutex::new(HashMap::new()),
            backend_calls: AtomicUsize::new(0),
        }
    }

    /// Open (or create) `dir/transcripts.jsonl`.
    pub fn open(dir: &Path) -> Result<Self, AsrError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| AsrError::Cache { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(CACHE_FILE_NAME);
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(io_err(&path))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err(&path))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(l) => {
                        let key = (l.backend_id.clone(), l.chain_id.clone(), l.audio_hash.clone());
                        entries.insert(
                            key,
                            TranscriptRecord {
                                sample_id: l.sample_id,
                                backend_id: l.backend_id,
                                chain_id: l.chain_id,
                                audio_hash: l.audio_hash,
                                text: l.text,
                            },
                        );
                    }
                    Err(e) => log::warn!(
                        "{}:{}: skipping corrupt cache line ({e})",
                        path.display(),
                        idx + 1
                    ),
                }
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Self {
            path: Some(path),
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(writer)),
            in_flight: Mutex::new(HashMap::new()),
            backend_calls: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of backend invocations made through this cache.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn get(&self, backend_id: &str, chain_id: &str, audio_hash: &str) -> Option<TranscriptRecord> {
        let key = (backend_id.to_owned(), chain_id.to_owned(), audio_hash.to_owned());
        self.entries.lock().unwrap().get(&key).cloned()
    }

    pub fn insert(&self, record: TranscriptRecord) -> Result<(), AsrError> {
        let mut writer = self.writer.lock().unwrap();
        if let (Some(file), Some(path)) = (writer.as_mut(), self.path.as_ref()) {
            let line = CacheLine {
                backend_id: record.backend_id.clone(),
                chain_id: record.chain_id.clone(),
                audio_hash: record.audio_hash.clone(),
                sample_id: record.sample_id.clone(),
                text: record.text.clone(),
                created_at: chrono::Utc::now().to_rfc3339(),
            };
            let mut json = serde_json::to_string(&line).expect("cache line serializes");
            json.push('\n');
            file.write_all(json.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| AsrError::Cache {
                    path: path.clone(),
                    source,
                })?;
        }
        let key = (
            record.backend_id.clone(),
            record.chain_id.clone(),
            record.audio_hash.clone(),
        );
        self.entries.lock().unwrap().insert(key, record);
        Ok(())
    }

    fn key_lock(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        self.in_flight
            .lock()
            .unwrap()
            .entry(key.clone())
            .or_default()
            .clone()
    }
}

/// Transcribe `audio_path` unless an entry for the same backend, chain and
/// audio content already exists. The returned record carries `sample_id`
/// even when the cached text was produced for another sample.
pub fn cached_transcribe(
    cache: &TranscriptCache,
    backend: &dyn Transcriber,
    chain_id: &str,
    sample_id: &str,
    audio_path: &Path,
) -> Result<TranscriptRecord, AsrError> {
    let bytes = std::fs::read(audio_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AsrError::MissingAudio(audio_path.to_path_buf())
        } else {
            AsrError::Cache {
                path: audio_path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let audio_hash = hash_bytes(&bytes);
    let key = (backend.id().to_owned(), chain_id.to_owned(), audio_hash.clone());
    let lock = cache.key_lock(&key);
    let _guard = lock.lock().unwrap();

    if let Some(mut hit) = cache.get(&key.0, &key.1, &key.2) {
        hit.sample_id = sample_id.to_owned();
        return Ok(hit);
    }
    cache.backend_calls.fetch_add(1, Ordering::SeqCst);
    let text = backend.transcribe(audio_path)?;
    let record = TranscriptRecord {
        sample_id: sample_id.to_owned(),
        backend_id: key.0,
        chain_id: key.1,
        audio_hash,
        text,
    };
    cache.insert(record.clone())?;
    Ok(record)
}
