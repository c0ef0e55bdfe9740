//! Zero-phase Butterworth high-pass ("line enhancement").
//!
//! A 4th-order Butterworth realized as two biquads, run forward then
//! backward. The two passes square the magnitude response, so the per-pass
//! design cutoff is pulled down until the *combined* response is -3 dB at
//! the requested corner.

use std::f64::consts::PI;

use super::DspError;
use crate::audio_io::AudioBuffer;

/// Corner frequency of the line-enhancement high-pass.
pub const LINE_ENHANCEMENT_CUTOFF_HZ: f64 = 300.0;

const BUTTERWORTH_ORDER: usize = 4;
const EDGE_PAD: usize = 256;

/// Transposed direct-form II biquad, coefficients normalized by a0.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn highpass(cutoff_hz: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 + cos) / 2.0 / a0;
        Self {
            b: [b0, -(1.0 + cos) / a0, b0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State for steady-state response to a constant unit input.
    fn steady_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    /// Even-order Butterworth high-pass whose forward-backward response is
    /// -3 dB at `corner_hz`.
    pub fn zero_phase_butterworth_highpass(
        order: usize,
        corner_hz: f64,
        sample_rate: f64,
    ) -> Result<Self, DspError> {
        if order == 0 || order % 2 != 0 {
            return Err(DspError::InvalidParams(format!(
                "order must be even and positive, got {order}"
            )));
        }
        if !(corner_hz > 0.0 && corner_hz < sample_rate / 2.0) {
            return Err(DspError::InvalidParams(format!(
                "corner {corner_hz} Hz outside (0, {}) Hz",
                sample_rate / 2.0
            )));
        }
        // |H|^2 = 1 / (1 + r^(2N)) in the bilinear-warped domain; two passes
        // give |H|^4, which equals 1/sqrt(2) in power when r^(2N) = sqrt(2) - 1.
        let shrink = (std::f64::consts::SQRT_2 - 1.0).powf(1.0 / (2 * order) as f64);
        let warped = (PI * corner_hz / sample_rate).tan() * shrink;
        let design_hz = warped.atan() * sample_rate / PI;

        let sections = (0..order / 2)
            .map(|k| {
                let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
                let q = 1.0 / (2.0 * theta.cos());
                Biquad::highpass(design_hz, sample_rate, q)
            })
            .collect();
        Ok(Self { sections })
    }

    fn run_once(&self, x: &mut [f64]) {
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut scale = x0;
        for s in &self.sections {
            let zi = s.steady_state();
            s.run(x, [zi[0] * scale, zi[1] * scale]);
            scale *= s.dc_gain();
        }
    }

    /// Forward-backward filtering with odd-symmetric edge extension and
    /// steady-state initial conditions. Linear in the input.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = EDGE_PAD.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        self.run_once(&mut ext);
        ext.reverse();
        self.run_once(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// High-pass at 300 Hz, zero phase, same length and rate.
pub fn line_enhancement(buffer: &AudioBuffer) -> Result<AudioBuffer, DspError> {
    let rate = buffer.sample_rate_hz() as f64;
    if rate < 2.0 * LINE_ENHANCEMENT_CUTOFF_HZ {
        return Err(DspError::InvalidParams(format!(
            "sample rate {rate} Hz too low for a {LINE_ENHANCEMENT_CUTOFF_HZ} Hz high-pass"
        )));
    }
    let filter =
        SosFilter::zero_phase_butterworth_highpass(BUTTERWORTH_ORDER, LINE_ENHANCEMENT_CUTOFF_HZ, rate)?;
    Ok(buffer.with_samples(filter.filtfilt(buffer.samples())))
}
