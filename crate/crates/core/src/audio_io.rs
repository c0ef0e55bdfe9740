//! WAV loading/writing and band-limited resampling.
//!
//! Everything downstream works on [`AudioBuffer`]s at [`CANONICAL_RATE_HZ`]
//! with a single channel. [`load_wav`] mixes down and resamples on entry;
//! [`write_wav`] always emits 16-bit PCM mono.

use std::f64::consts::PI;
use std::io::{Cursor, Seek, Write};
use std::path::Path;

use thiserror::Error;

/// Sample rate every loader converts to.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

/// Lowest rate [`resample`] accepts as a target.
pub const MIN_TARGET_RATE_HZ: u32 = 4_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    MissingFile(String),
    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),
    #[error("zero-length audio")]
    ZeroLength,
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid sample rate {0}")]
    InvalidRate(u32),
    #[error("resample target {0} Hz is below the {MIN_TARGET_RATE_HZ} Hz minimum")]
    TargetTooLow(u32),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mono floating-point audio at a known sample rate.
///
/// Samples are guaranteed finite. Loaders clip to [-1, 1]; buffers built
/// directly with [`AudioBuffer::new`] may exceed that range and are clipped
/// when written.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidRate(sample_rate_hz));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Same rate, new samples. Used by in-process processors whose output
    /// is finite by construction.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            AudioError::CorruptHeader(format!("unexpected end of file: {e}"))
        }
        hound::Error::IoError(e) => AudioError::CorruptHeader(e.to_string()),
        hound::Error::FormatError(msg) => AudioError::CorruptHeader(msg.to_string()),
        hound::Error::TooWide => AudioError::UnsupportedCodec("sample too wide".into()),
        hound::Error::UnfinishedSample => AudioError::CorruptHeader("truncated sample".into()),
        hound::Error::Unsupported => AudioError::UnsupportedCodec("unsupported WAV feature".into()),
        hound::Error::InvalidSampleFormat => {
            AudioError::UnsupportedCodec("invalid sample format".into())
        }
    }
}

/// Decode a RIFF/WAVE byte stream without resampling.
///
/// Returns the channel-mean mix at the file's native rate.
pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::CorruptHeader("zero channels".into()));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::CorruptHeader("zero sample rate".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let full_scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<Result<_, _>>()
                .map_err(map_hound)?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedCodec(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };

    if interleaved.is_empty() {
        return Err(AudioError::ZeroLength);
    }

    let mut mono = Vec::with_capacity(interleaved.len() / channels);
    for frame in interleaved.chunks(channels) {
        if frame.len() < channels {
            break;
        }
        let mean = frame.iter().sum::<f64>() / channels as f64;
        // NaN floats in a 32-bit float file are treated as silence
        let v = if mean.is_finite() { mean.clamp(-1.0, 1.0) } else { 0.0 };
        mono.push(v);
    }
    if mono.is_empty() {
        return Err(AudioError::ZeroLength);
    }
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Load a WAV file as a canonical 16 kHz mono buffer.
pub fn load_wav(path: &Path) -> Result<AudioBuffer, AudioError> {
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AudioError::MissingFile(path.display().to_string())
        } else {
            AudioError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    let native = decode_wav_bytes(&bytes)?;
    let mut out = resample(&native, CANONICAL_RATE_HZ)?;
    // the interpolation kernel can overshoot slightly near full scale
    for s in &mut out.samples {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok(out)
}

fn quantize_pcm16(sample: f64) -> i16 {
    let scaled = (sample.clamp(-1.0, 1.0) * 32768.0).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

fn write_pcm16<W: Write + Seek>(buffer: &AudioBuffer, sink: W) -> Result<(), hound::Error> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::new(sink, spec)?;
    {
        let mut w16 = writer.get_i16_writer(buffer.samples.len() as u32);
        for &s in &buffer.samples {
            w16.write_sample(quantize_pcm16(s));
        }
        w16.flush()?;
    }
    writer.finalize()
}

/// Encode as 16-bit PCM mono WAV bytes.
pub fn encode_wav_bytes(buffer: &AudioBuffer) -> Result<Vec<u8>, AudioError> {
    if buffer.is_empty() {
        return Err(AudioError::ZeroLength);
    }
    let mut cursor = Cursor::new(Vec::new());
    write_pcm16(buffer, &mut cursor).map_err(map_hound)?;
    Ok(cursor.into_inner())
}

/// Write a 16-bit PCM mono WAV at the buffer's own sample rate.
/// Values are hard-clipped to [-1, 1] before quantization.
pub fn write_wav(buffer: &AudioBuffer, path: &Path) -> Result<(), AudioError> {
    let bytes = encode_wav_bytes(buffer)?;
    std::fs::write(path, bytes).map_err(|e| AudioError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

const RESAMPLE_ZERO_CROSSINGS: f64 = 24.0;
const RESAMPLE_ROLLOFF: f64 = 0.94;
const RESAMPLE_KAISER_BETA: f64 = 8.6;

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// Output length is `round(len * target / source)`. When downsampling the
/// kernel cutoff sits at 94% of the new Nyquist frequency.
pub fn resample(buffer: &AudioBuffer, target_hz: u32) -> Result<AudioBuffer, AudioError> {
    if target_hz < MIN_TARGET_RATE_HZ {
        return Err(AudioError::TargetTooLow(target_hz));
    }
    let source_hz = buffer.sample_rate_hz;
    if source_hz == target_hz {
        return Ok(buffer.clone());
    }
    let input = &buffer.samples;
    let ratio = target_hz as f64 / source_hz as f64;
    let out_len = (input.len() as f64 * ratio).round() as usize;

    // cutoff in cycles per input sample
    let cutoff = 0.5 * ratio.min(1.0) * RESAMPLE_ROLLOFF;
    let half_width = RESAMPLE_ZERO_CROSSINGS / (2.0 * cutoff);
    let norm_beta = bessel_i0(RESAMPLE_KAISER_BETA);

    let kernel = |tau: f64| -> f64 {
        let r = tau / half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(RESAMPLE_KAISER_BETA * (1.0 - r * r).sqrt()) / norm_beta;
        let x = 2.0 * cutoff * tau;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        };
        2.0 * cutoff * sinc * window
    };

    let step = source_hz as f64 / target_hz as f64;
    let n = input.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let t = m as f64 * step;
        let lo = (t - half_width).ceil().max(0.0) as isize;
        let hi = ((t + half_width).floor() as isize).min(n - 1);
        let mut acc = 0.0;
        for i in lo..=hi {
            acc += input[i as usize] * kernel(t - i as f64);
        }
        out.push(acc);
    }
    AudioBuffer::new(out, target_hz)
}
