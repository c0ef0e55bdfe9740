//! Synthetic corpus and deterministic mock ASR shared by integration tests.
//!
//! Each "word" is a 200 ms tone at one of sixteen vocabulary frequencies.
//! Every clip also carries a steady 2.5 kHz pilot. Noisy clips get short
//! low-frequency bursts on top of some words; the mock ASR drops a word when
//! its tone holds too small a share of the segment energy.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selden::asr::{hash_bytes, AsrError, Transcriber};
use selden::audio_io::{self, AudioBuffer};
use selden::config::RunConfig;
use selden::manifest::{load_manifest, SampleRecord};

pub const RATE: u32 = 16_000;
pub const WORD_SECS: f64 = 0.2;
pub const LEAD_SECS: f64 = 0.1;
pub const WORDS_PER_CLIP: usize = 8;
pub const TONE_AMP: f64 = 0.2;
pub const PILOT_AMP: f64 = 0.2;
pub const PILOT_HZ: f64 = 2500.0;
pub const BURST_AMP: f64 = 0.55;
pub const BURST_SECS: f64 = 0.08;
/// Minimum share of segment energy the detected tone needs to be heard.
pub const DETECTION_SHARE: f64 = 0.3;

pub const VOCAB: [&str; 16] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima", "mike", "november", "oscar", "papa",
];

pub fn word_hz(i: usize) -> f64 {
    400.0 + 100.0 * i as f64
}

fn segment_len() -> usize {
    (WORD_SECS * RATE as f64) as usize
}

fn lead_len() -> usize {
    (LEAD_SECS * RATE as f64) as usize
}

pub struct Clip {
    pub samples: Vec<f64>,
    pub words: Vec<usize>,
    pub bursts: usize,
}

impl Clip {
    pub fn transcript(&self) -> String {
        self.words.iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" ")
    }
}

/// One clip: distinct random words, pilot, faint hiss, and `bursts` noise
/// bursts on randomly chosen words.
pub fn synth_clip(rng: &mut ChaCha8Rng, bursts: usize) -> Clip {
    let seg = segment_len();
    let lead = lead_len();
    let n = 2 * lead + WORDS_PER_CLIP * seg;
    let mut idx: Vec<usize> = (0..VOCAB.len()).collect();
    idx.shuffle(rng);
    let words: Vec<usize> = idx[..WORDS_PER_CLIP].to_vec();
    let rate = RATE as f64;
    let pilot_phase = rng.gen_range(0.0..2.0 * PI);
    let mut x: Vec<f64> = (0..n)
        .map(|i| PILOT_AMP * (2.0 * PI * PILOT_HZ * i as f64 / rate + pilot_phase).sin() + rng.gen_range(-1e-3..1e-3))
        .collect();
    let ramp = (0.005 * rate) as usize;
    for (w, &word) in words.iter().enumerate() {
        let start = lead + w * seg;
        let f = word_hz(word);
        for k in 0..seg {
            let env = ((k.min(seg - 1 - k)) as f64 / ramp as f64).min(1.0);
            x[start + k] += TONE_AMP * env * (2.0 * PI * f * k as f64 / rate).sin();
        }
    }
    let mut slots: Vec<usize> = (0..WORDS_PER_CLIP).collect();
    slots.shuffle(rng);
    let burst_len = (BURST_SECS * rate) as usize;
    for &w in &slots[..bursts] {
        let start = lead + w * seg + rng.gen_range(0..seg - burst_len);
        let f = rng.gen_range(60.0..140.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        for k in 0..burst_len {
            let env = ((k.min(burst_len - 1 - k)) as f64 / ramp as f64).min(1.0);
            x[start + k] += BURST_AMP * env * (2.0 * PI * f * k as f64 / rate + phase).sin();
        }
    }
    Clip {
        samples: x,
        words,
        bursts,
    }
}

/// Power of `x` at frequency `f` relative to its total power; 1.0 for a
/// pure tone at `f` spanning whole cycles.
fn tone_share(x: &[f64], f: f64) -> f64 {
    let w = 2.0 * PI * f / RATE as f64;
    let coeff = 2.0 * w.cos();
    let (mut s1, mut s2) = (0.0, 0.0);
    for &v in x {
        let s = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s;
    }
    let power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return 0.0;
    }
    2.0 * power / (x.len() as f64 * total)
}

/// Decode a clip laid out like [`synth_clip`].
pub fn decode(samples: &[f64]) -> String {
    let seg = segment_len();
    let lead = lead_len();
    let mut out = Vec::new();
    for w in 0..WORDS_PER_CLIP {
        let start = lead + w * seg;
        let Some(x) = samples.get(start..start + seg) else { break };
        let (best, share) = (0..VOCAB.len())
            .map(|i| (i, tone_share(x, word_hz(i))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if share >= DETECTION_SHARE {
            out.push(VOCAB[best]);
        }
    }
    out.join(" ")
}

/// In-process ASR over the tone vocabulary. Records every call.
pub struct ToneAsr {
    pub id: String,
    pub calls: AtomicUsize,
    pub seen: Mutex<Vec<(PathBuf, String)>>,
}

impl ToneAsr {
    pub fn new(id: &str) -> Arc<Self> {
        Arc::new(Self {
            id: id.into(),
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transcriber for ToneAsr {
    fn id(&self) -> &str {
        &self.id
    }

    fn transcribe(&self, audio_path: &Path) -> Result<String, AsrError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let bytes = std::fs::read(audio_path).map_err(|_| AsrError::MissingAudio(audio_path.into()))?;
        self.seen
            .lock()
            .unwrap()
            .push((audio_path.to_path_buf(), hash_bytes(&bytes)));
        let audio = audio_io::decode_wav_bytes(&bytes).map_err(|e| AsrError::Failed {
            backend: self.id.clone(),
            status: "decode".into(),
            diagnostics: e.to_string(),
        })?;
        Ok(decode(audio.samples()))
    }
}

/// Echoes a fixed transcript per file name, ignoring the audio.
pub struct OracleAsr {
    pub id: String,
    pub transcripts: std::collections::HashMap<PathBuf, String>,
}

impl Transcriber for OracleAsr {
    fn id(&self) -> &str {
        &self.id
    }
    fn transcribe(&self, audio_path: &Path) -> Result<String, AsrError> {
        Ok(self.transcripts.get(audio_path).cloned().unwrap_or_default())
    }
}

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub records: Vec<SampleRecord>,
    pub clips: Vec<Clip>,
}

impl Corpus {
    pub fn manifest_path(&self) -> PathBuf {
        self.dir.path().join("manifest.jsonl")
    }

    pub fn config(&self) -> RunConfig {
        RunConfig {
            cache_dir: self.dir.path().join("cache"),
            workers: 4,
            ..RunConfig::default()
        }
    }
}

/// `per_group` clean "male" clips and `per_group` noisy "female" clips with
/// 2..=6 bursts each, written as WAV plus a JSONL manifest.
pub fn disparity_corpus(per_group: usize, seed: u64) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clips = Vec::new();
    let mut manifest = String::new();
    for i in 0..2 * per_group {
        let noisy = i % 2 == 1;
        let bursts = if noisy { rng.gen_range(2..=6) } else { 0 };
        let clip = synth_clip(&mut rng, bursts);
        let id = format!("clip{i:03}");
        let path = dir.path().join(format!("{id}.wav"));
        audio_io::write_wav(&AudioBuffer::new(clip.samples.clone(), RATE).unwrap(), &path).unwrap();
        let gender = if noisy { "female" } else { "male" };
        let line = serde_json::json!({
            "id": id,
            "audio_path": format!("{id}.wav"),
            "transcript": clip.transcript(),
            "gender": gender,
            "accent": if i % 4 < 2 { "north" } else { "south" },
            "dataset": "synthetic",
        });
        manifest.push_str(&line.to_string());
        manifest.push('\n');
        clips.push(clip);
    }
    let path = dir.path().join("manifest.jsonl");
    std::fs::write(&path, &manifest).unwrap();
    let records = load_manifest(&path, "gender").unwrap();
    Corpus { dir, records, clips }
}
