//! JSONL sample manifests.
//!
//! One JSON object per line. Recognized keys are `id`, `audio_path`,
//! `transcript`, `attributes`, `dataset` and `split`; any other top-level
//! string field is treated as an attribute, so `{"gender": "female"}` and
//! `{"attributes": {"gender": "female"}}` are equivalent. Relative audio
//! paths are resolved against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const DEFAULT_DATASET: &str = "default";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("manifest line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("manifest line {line}: missing grouping attribute `{attribute}`")]
    MissingAttribute { line: usize, attribute: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub audio_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

fn default_dataset() -> String {
    DEFAULT_DATASET.to_owned()
}

impl SampleRecord {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }
}

const KNOWN_KEYS: [&str; 6] = ["id", "audio_path", "transcript", "attributes", "dataset", "split"];

fn parse_line(text: &str, line: usize, base: &Path) -> Result<SampleRecord, ManifestError> {
    let malformed = |message: String| ManifestError::Malformed { line, message };
    let obj: Map<String, Value> = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let mut known = Map::new();
    let mut extra = BTreeMap::new();
    for (k, v) in obj {
        if KNOWN_KEYS.contains(&k.as_str()) {
            known.insert(k, v);
        } else if let Value::String(s) = v {
            extra.insert(k, s);
        }
    }
    let mut record: SampleRecord =
        serde_json::from_value(Value::Object(known)).map_err(|e| malformed(e.to_string()))?;
    if record.id.is_empty() {
        return Err(malformed("empty id".into()));
    }
    for (k, v) in extra {
        record.attributes.entry(k).or_insert(v);
    }
    if record.audio_path.is_relative() {
        record.audio_path = base.join(&record.audio_path);
    }
    Ok(record)
}

/// Parse a manifest, checking id uniqueness and that every record carries
/// `group_attribute`. Audio files are not touched here.
pub fn load_manifest(path: &Path, group_attribute: &str) -> Result<Vec<SampleRecord>, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(raw, line, base)?;
        if !seen.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId { line, id: record.id });
        }
        if record.attribute(group_attribute).map_or(true, str::is_empty) {
            return Err(ManifestError::MissingAttribute {
                line,
                attribute: group_attribute.to_owned(),
            });
        }
        records.push(record);
    }
    Ok(records)
}
