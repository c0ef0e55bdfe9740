//! Selective denoising for reducing demographic WER disparity in ASR.
//!
//! Samples are scored with a reference-free intelligibility estimate; only
//! those below a threshold learned on a small validation split are denoised
//! before transcription. Disparity is reported as the absolute gap between
//! per-group median WERs.

pub mod asr;
pub mod audio_io;
pub mod chain;
pub mod config;
pub mod dsp;
pub mod intelligibility;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod process;
pub mod report;
pub mod textnorm;
pub mod threshold;
