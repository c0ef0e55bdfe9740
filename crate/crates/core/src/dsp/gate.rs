//! Stationary spectral gating.
//!
//! One noise profile per file: per-bin dB statistics over the quietest
//! frames give a threshold, a soft sigmoid around it gives a mask, the mask
//! is smoothed in time and frequency, and the masked STFT is resynthesized.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::stft::{StftEngine, StftParams};
use super::DspError;
use crate::audio_io::AudioBuffer;

/// Magnitudes below this are treated as this value in dB space (-200 dB).
const MAGNITUDE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateParams {
    pub stft: StftParams,
    /// Fraction of frames (lowest energy first) used for the noise profile.
    pub quiet_fraction: f64,
    /// Threshold = mean + n_std * std of the quiet frames, per bin, in dB.
    pub n_std: f64,
    /// Width of the sigmoid transition, in dB.
    pub sigmoid_slope_db: f64,
    /// Half-width of the triangular mask smoother along time.
    pub smooth_frames: usize,
    /// Half-width of the triangular mask smoother along frequency.
    pub smooth_bins: usize,
    /// Half-width of the running median applied across frequency to the
    /// threshold curve. Tones that persist through the quiet frames are
    /// treated as signal rather than as part of the noise floor.
    pub profile_median_bins: usize,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            stft: StftParams::default(),
            quiet_fraction: 0.10,
            n_std: 1.5,
            sigmoid_slope_db: 1.0,
            smooth_frames: 2,
            smooth_bins: 2,
            profile_median_bins: 8,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<(), DspError> {
        self.stft.validate()?;
        if !(self.quiet_fraction > 0.0 && self.quiet_fraction <= 1.0) {
            return Err(DspError::InvalidParams(format!(
                "quiet_fraction must be in (0, 1], got {}",
                self.quiet_fraction
            )));
        }
        if !(self.sigmoid_slope_db > 0.0) || !self.n_std.is_finite() {
            return Err(DspError::InvalidParams(
                "sigmoid_slope_db must be positive and n_std finite".into(),
            ));
        }
        Ok(())
    }
}

fn to_db(mag: f64) -> f64 {
    20.0 * mag.max(MAGNITUDE_FLOOR).log10()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-bin gate threshold in dB from the quietest unpadded frames.
fn noise_threshold_db(spectra: &[Vec<Complex<f64>>], params: &GateParams) -> Vec<f64> {
    let bins = params.stft.bins();
    let mut order: Vec<(f64, usize)> = spectra
        .iter()
        .enumerate()
        .map(|(i, frame)| (frame.iter().map(|c| c.norm_sqr()).sum::<f64>(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let take = ((spectra.len() as f64 * params.quiet_fraction).ceil() as usize).clamp(1, spectra.len());
    let quiet: Vec<usize> = order[..take].iter().map(|&(_, i)| i).collect();

    let mut threshold = Vec::with_capacity(bins);
    for k in 0..bins {
        let db: Vec<f64> = quiet.iter().map(|&f| to_db(spectra[f][k].norm())).collect();
        let mean = db.iter().sum::<f64>() / db.len() as f64;
        let var = db.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / db.len() as f64;
        threshold.push(mean + params.n_std * var.sqrt());
    }

    if params.profile_median_bins == 0 {
        return threshold;
    }
    let w = params.profile_median_bins;
    (0..bins)
        .map(|k| {
            let lo = k.saturating_sub(w);
            let hi = (k + w).min(bins - 1);
            let mut win = threshold[lo..=hi].to_vec();
            win.sort_by(f64::total_cmp);
            let m = win.len();
            if m % 2 == 1 {
                win[m / 2]
            } else {
                0.5 * (win[m / 2 - 1] + win[m / 2])
            }
        })
        .collect()
}

fn triangle(half: usize) -> Vec<f64> {
    (0..=2 * half)
        .map(|i| (half + 1 - (i as isize - half as isize).unsigned_abs()) as f64)
        .collect()
}

/// Separable triangular smoothing; weights renormalized at the edges.
fn smooth_mask(mask: &mut [Vec<f64>], half_t: usize, half_f: usize) {
    let frames = mask.len();
    if frames == 0 {
        return;
    }
    let bins = mask[0].len();
    let wf = triangle(half_f);
    let wt = triangle(half_t);

    let mut tmp = vec![vec![0.0; bins]; frames];
    for t in 0..frames {
        for k in 0..bins {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, w) in wf.iter().enumerate() {
                let kk = k as isize + j as isize - half_f as isize;
                if kk >= 0 && (kk as usize) < bins {
                    acc += w * mask[t][kk as usize];
                    wsum += w;
                }
            }
            tmp[t][k] = acc / wsum;
        }
    }
    for t in 0..frames {
        for k in 0..bins {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, w) in wt.iter().enumerate() {
                let tt = t as isize + j as isize - half_t as isize;
                if tt >= 0 && (tt as usize) < frames {
                    acc += w * tmp[tt as usize][k];
                    wsum += w;
                }
            }
            mask[t][k] = acc / wsum;
        }
    }
}

/// Spectral gating with a stationary per-file noise profile.
///
/// Requires at least two full STFT windows of audio. Output has the input's
/// length and rate, and never carries more energy than the input.
pub fn spectral_gate(buffer: &AudioBuffer, params: &GateParams) -> Result<AudioBuffer, DspError> {
    params.validate()?;
    let n_fft = params.stft.n_fft;
    let hop = params.stft.hop;
    let len = buffer.len();
    if len < 2 * n_fft {
        return Err(DspError::TooShort {
            needed: 2 * n_fft,
            got: len,
        });
    }
    let engine = StftEngine::new(params.stft)?;

    let unpadded = engine.analyze(buffer.samples());
    let threshold = noise_threshold_db(&unpadded, params);

    // zero-pad so every original sample is covered by n_fft/hop frames
    let mut padded = vec![0.0; n_fft];
    padded.extend_from_slice(buffer.samples());
    let tail = n_fft + (hop - (len % hop)) % hop;
    padded.extend(std::iter::repeat(0.0).take(tail));

    let mut spectra = engine.analyze(&padded);
    let mut mask: Vec<Vec<f64>> = spectra
        .iter()
        .map(|frame| {
            frame
                .iter()
                .zip(&threshold)
                .map(|(c, th)| sigmoid((to_db(c.norm()) - th) / params.sigmoid_slope_db))
                .collect()
        })
        .collect();
    smooth_mask(&mut mask, params.smooth_frames, params.smooth_bins);

    for (frame, m) in spectra.iter_mut().zip(&mask) {
        for (c, g) in frame.iter_mut().zip(m) {
            *c *= *g;
        }
    }
    let out = engine.synthesize(&spectra, padded.len());
    Ok(buffer.with_samples(out[n_fft..n_fft + len].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn tone(amp: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| amp * (2.0 * PI * 1000.0 * i as f64 / 16_000.0).sin())
            .collect()
    }

    fn white(seed: u64, len: usize, rms: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = (energy(&raw) / len as f64).sqrt();
        raw.into_iter().map(|v| v * rms / r).collect()
    }

    fn ncc(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot / (energy(a).sqrt() * energy(b).sqrt())
    }

    #[test]
    fn zero_in_zero_out() {
        let b = AudioBuffer::new(vec![0.0; 8000], 16_000).unwrap();
        let out = spectral_gate(&b, &GateParams::default()).unwrap();
        assert_eq!(out.len(), 8000);
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short() {
        let b = AudioBuffer::new(vec![0.1; 2047], 16_000).unwrap();
        assert!(matches!(
            spectral_gate(&b, &GateParams::default()),
            Err(DspError::TooShort { needed: 2048, .. })
        ));
    }

    #[test]
    fn clean_tone_survives() {
        let x = tone(0.5, 16_000);
        let b = AudioBuffer::new(x.clone(), 16_000).unwrap();
        let out = spectral_gate(&b, &GateParams::default()).unwrap();
        assert!(ncc(&x, out.samples()) >= 0.95);
    }

    #[test]
    fn noisy_tone_snr_improves() {
        let clean = tone(0.5, 16_000);
        let noise = white(7, 16_000, 0.5 / 2f64.sqrt());
        let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let b = AudioBuffer::new(noisy, 16_000).unwrap();
        let out = spectral_gate(&b, &GateParams::default()).unwrap();
        let resid: Vec<f64> = out.samples().iter().zip(&clean).map(|(o, c)| o - c).collect();
        let snr = 10.0 * (energy(&clean) / energy(&resid)).log10();
        assert!(snr >= 6.0, "output SNR {snr:.2} dB");
    }

    #[test]
    fn never_adds_energy() {
        for seed in 0..5 {
            let x = white(seed, 9000, 0.2);
            let b = AudioBuffer::new(x.clone(), 16_000).unwrap();
            let out = spectral_gate(&b, &GateParams::default()).unwrap();
            assert!(energy(out.samples()) <= energy(&x) * (1.0 + 1e-6));
        }
    }

    #[test]
    fn triangle_weights() {
        assert_eq!(triangle(2), vec![1.0, 2.0, 3.0, 2.0, 1.0]);
        assert_eq!(triangle(0), vec![1.0]);
    }
}
