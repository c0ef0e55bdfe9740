//! Time-frequency analysis and the two in-process denoisers.

mod filter;
mod gate;
mod stft;

use thiserror::Error;

pub use filter::{line_enhancement, SosFilter, LINE_ENHANCEMENT_CUTOFF_HZ};
pub use gate::{spectral_gate, GateParams};
pub use stft::{
    export_spectrogram_csv, spectrogram_csv, stft_magnitude, Spectrogram, StftParams, WindowKind,
};

pub(crate) use stft::StftEngine;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("buffer too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
