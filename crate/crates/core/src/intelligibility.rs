//! Reference-free `stoi_like` intelligibility score and the simplified
//! reference-based STOI correlation.
//!
//! `stoi_like` works on the magnitude STFT `|Y(k,n)|` of a single signal:
//!
//! ```text
//! E_signal = sum_k (mean_n |Y(k,n)|)^2
//! E_noise  = total - E_signal
//! score    = ln(E_signal / max(E_noise, 1e-10 * E_signal))
//! ```
//!
//! In [`ScoreMode::PaperLiteral`] the total is `sum_{k,n} |Y(k,n)|^2`, which
//! grows with the number of frames, so longer clips score lower. In
//! [`ScoreMode::FrameInvariant`] the total is `sum_k mean_n |Y(k,n)|^2`,
//! making `E_noise` the summed per-bin variance of the magnitudes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;
use crate::dsp::{stft_magnitude, DspError, StftEngine, StftParams};

/// `E_noise` is clamped to this fraction of `E_signal` before the log.
pub const NOISE_FLOOR_RATIO: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("unscorable: input is silent")]
    Unscorable,
    #[error("need at least {needed} samples for two STFT frames, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("length mismatch: clean has {clean} samples, degraded has {degraded}")]
    LengthMismatch { clean: usize, degraded: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    #[default]
    PaperLiteral,
    FrameInvariant,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::PaperLiteral => "paper-literal",
            ScoreMode::FrameInvariant => "frame-invariant",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-literal" => Ok(ScoreMode::PaperLiteral),
            "frame-invariant" => Ok(ScoreMode::FrameInvariant),
            other => Err(format!("unknown score mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntelligibilityScore {
    pub score: f64,
    pub e_signal: f64,
    pub e_noise: f64,
    pub mode: ScoreMode,
}

pub fn stoi_like(
    buffer: &AudioBuffer,
    params: StftParams,
    mode: ScoreMode,
) -> Result<IntelligibilityScore, ScoreError> {
    params.validate()?;
    let needed = params.n_fft + params.hop;
    if buffer.len() < needed {
        return Err(ScoreError::TooShort {
            needed,
            got: buffer.len(),
        });
    }
    let spec = stft_magnitude(buffer, params)?;
    let frames = spec.frames() as f64;

    let mut e_signal = 0.0;
    let mut e_noise = 0.0;
    for k in 0..spec.bins() {
        let row = spec.bin_row(k);
        let mean = row.iter().sum::<f64>() / frames;
        let mean_sq = mean * mean;
        e_signal += mean_sq;
        match mode {
            ScoreMode::PaperLiteral => {
                let total: f64 = row.iter().map(|m| m * m).sum();
                e_noise += total - mean_sq;
            }
            ScoreMode::FrameInvariant => {
                e_noise += row.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / frames;
            }
        }
    }

    if e_signal <= 0.0 {
        return Err(ScoreError::Unscorable);
    }
    // rounding can leave a tiny negative residue for perfectly stationary input
    debug_assert!(e_noise >= -1e-9 * e_signal * frames, "E_noise {e_noise}");
    let e_noise = e_noise.max(0.0);
    let score = (e_signal / e_noise.max(NOISE_FLOOR_RATIO * e_signal)).ln();
    Ok(IntelligibilityScore {
        score,
        e_signal,
        e_noise,
        mode,
    })
}

/// Bins whose norm falls below this fraction of the signal's largest bin
/// norm count as silent.
const SILENT_BIN_RATIO: f64 = 1e-8;

/// Mean over non-silent bins of `|<X(k,.), Y(k,.)>| / (||X(k,.)|| ||Y(k,.)||)`
/// on complex STFT rows. A bin silent in both signals is skipped; a bin
/// silent in only one contributes zero. Identical signals score 1.
pub fn stoi_reference_correlation(
    clean: &AudioBuffer,
    degraded: &AudioBuffer,
    params: StftParams,
) -> Result<f64, ScoreError> {
    if clean.len() != degraded.len() {
        return Err(ScoreError::LengthMismatch {
            clean: clean.len(),
            degraded: degraded.len(),
        });
    }
    params.validate()?;
    if clean.len() < params.n_fft {
        return Err(ScoreError::TooShort {
            needed: params.n_fft,
            got: clean.len(),
        });
    }
    let engine = StftEngine::new(params)?;
    let x = engine.analyze(clean.samples());
    let y = engine.analyze(degraded.samples());
    let bins = params.bins();

    let row_norm = |s: &[Vec<rustfft::num_complex::Complex<f64>>], k: usize| {
        s.iter().map(|f| f[k].norm_sqr()).sum::<f64>().sqrt()
    };
    let x_norms: Vec<f64> = (0..bins).map(|k| row_norm(&x, k)).collect();
    let y_norms: Vec<f64> = (0..bins).map(|k| row_norm(&y, k)).collect();
    let x_peak = x_norms.iter().cloned().fold(0.0, f64::max);
    let y_peak = y_norms.iter().cloned().fold(0.0, f64::max);
    if x_peak == 0.0 || y_peak == 0.0 {
        return Err(ScoreError::Unscorable);
    }

    let mut sum = 0.0;
    let mut counted = 0usize;
    for k in 0..bins {
        let x_live = x_norms[k] > SILENT_BIN_RATIO * x_peak;
        let y_live = y_norms[k] > SILENT_BIN_RATIO * y_peak;
        match (x_live, y_live) {
            (false, false) => continue,
            (true, true) => {
                let inner = x
                    .iter()
                    .zip(&y)
                    .map(|(fx, fy)| fx[k] * fy[k].conj())
                    .sum::<rustfft::num_complex::Complex<f64>>();
                sum += (inner.norm() / (x_norms[k] * y_norms[k])).min(1.0);
            }
            _ => {}
        }
        counted += 1;
    }
    Ok(sum / counted as f64)
}
