//! Short-time Fourier analysis and synthesis.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::DspError;
use crate::audio_io::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Periodic Hann. Its square overlap-adds to a constant at hop = n_fft/4.
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftParams {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            hop: 256,
            window: WindowKind::Hann,
        }
    }
}

impl StftParams {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.n_fft == 0 || !self.n_fft.is_power_of_two() {
            return Err(DspError::InvalidParams(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(DspError::InvalidParams(format!(
                "hop must be in 1..={}, got {}",
                self.n_fft, self.hop
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// `floor((len - n_fft) / hop) + 1`, or 0 when shorter than a window.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.n_fft {
            0
        } else {
            (len - self.n_fft) / self.hop + 1
        }
    }
}

/// Magnitude matrix indexed by (bin, frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    bins: usize,
    frames: usize,
    params: StftParams,
    sample_rate_hz: u32,
}

impl Spectrogram {
    /// Build from a bin-major matrix (`data[bin * frames + frame]`).
    pub fn from_bin_major(
        data: Vec<f64>,
        bins: usize,
        frames: usize,
        params: StftParams,
        sample_rate_hz: u32,
    ) -> Result<Self, DspError> {
        if data.len() != bins * frames {
            return Err(DspError::InvalidParams(format!(
                "matrix has {} cells, expected {bins}x{frames}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DspError::InvalidParams(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            data,
            bins,
            frames,
            params,
            sample_rate_hz,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn params(&self) -> StftParams {
        self.params
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }

    /// All frames of one bin.
    pub fn bin_row(&self, bin: usize) -> &[f64] {
        &self.data[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn bin_frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate_hz as f64 / self.params.n_fft as f64
    }

    /// Time of the window centre of `frame`.
    pub fn frame_time_secs(&self, frame: usize) -> f64 {
        (frame * self.params.hop + self.params.n_fft / 2) as f64 / self.sample_rate_hz as f64
    }
}

/// Reusable forward/inverse FFT plans plus the analysis window.
pub(crate) struct StftEngine {
    params: StftParams,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftEngine {
    pub(crate) fn new(params: StftParams) -> Result<Self, DspError> {
        params.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            params,
            window: params.window.coefficients(params.n_fft),
            forward: planner.plan_fft_forward(params.n_fft),
            inverse: planner.plan_fft_inverse(params.n_fft),
        })
    }

    /// Frame-major half spectra (`n_fft/2 + 1` bins per frame), no padding.
    pub(crate) fn analyze(&self, samples: &[f64]) -> Vec<Vec<Complex<f64>>> {
        let n = self.params.n_fft;
        let frames = self.params.frame_count(samples.len());
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut out = Vec::with_capacity(frames);
        for f in 0..frames {
            let start = f * self.params.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(samples[start + i] * self.window[i], 0.0);
            }
            self.forward.process(&mut buf);
            out.push(buf[..self.params.bins()].to_vec());
        }
        out
    }

    /// Weighted overlap-add of half spectra back to `len` samples.
    ///
    /// Uses the analysis window for synthesis and divides by the summed
    /// squared window, so an unmodified spectrum reconstructs exactly
    /// wherever that sum is not negligible.
    pub(crate) fn synthesize(&self, spectra: &[Vec<Complex<f64>>], len: usize) -> Vec<f64> {
        let n = self.params.n_fft;
        let hop = self.params.hop;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (f, half) in spectra.iter().enumerate() {
            buf[..half.len()].copy_from_slice(half);
            for k in 1..n / 2 {
                buf[n - k] = half[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = f * hop;
            for i in 0..n {
                let t = start + i;
                if t >= len {
                    break;
                }
                out[t] += buf[i].re / n as f64 * self.window[i];
                norm[t] += self.window[i] * self.window[i];
            }
        }
        let peak = norm.iter().cloned().fold(0.0, f64::max);
        for (o, w) in out.iter_mut().zip(&norm) {
            if *w > peak * 1e-8 {
                *o /= *w;
            } else {
                *o = 0.0;
            }
        }
        out
    }
}

/// Magnitude STFT without padding; frame `n` starts at sample `n * hop`.
pub fn stft_magnitude(buffer: &AudioBuffer, params: StftParams) -> Result<Spectrogram, DspError> {
    params.validate()?;
    if buffer.len() < params.n_fft {
        return Err(DspError::TooShort {
            needed: params.n_fft,
            got: buffer.len(),
        });
    }
    let engine = StftEngine::new(params)?;
    let spectra = engine.analyze(buffer.samples());
    let frames = spectra.len();
    let bins = params.bins();
    let mut data = vec![0.0; bins * frames];
    for (f, spec) in spectra.iter().enumerate() {
        for (k, c) in spec.iter().enumerate() {
            data[k * frames + f] = c.norm();
        }
    }
    Spectrogram::from_bin_major(data, bins, frames, params, buffer.sample_rate_hz())
}

/// Render as CSV: a header of frame times, then one row per bin led by its
/// frequency. Cells use the shortest round-tripping float form.
pub fn spectrogram_csv(spec: &Spectrogram) -> String {
    let mut out = String::from("freq_hz");
    for f in 0..spec.frames {
        let _ = write!(out, ",{:?}", spec.frame_time_secs(f));
    }
    out.push('\n');
    for k in 0..spec.bins {
        let _ = write!(out, "{:?}", spec.bin_frequency_hz(k));
        for v in spec.bin_row(k) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn export_spectrogram_csv(spec: &Spectrogram, path: &Path) -> Result<(), DspError> {
    std::fs::write(path, spectrogram_csv(spec)).map_err(|e| DspError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
