//! Validation split and intelligibility threshold search.
//!
//! The search is a pure function over precomputed per-sample outcomes: for
//! every validation sample we know its score, its group, and its WER both
//! with and without denoising. Evaluating a candidate threshold is then just
//! choosing one of the two WERs per sample.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intelligibility::ScoreMode;
use crate::metrics::{self, MetricError, WerResult};

pub const DEFAULT_EPSILON_WER_POINTS: f64 = 1.0;
pub const DEFAULT_GRID_SIZE: usize = 21;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("validation fraction must be in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("sample {0} has an empty group label")]
    EmptyGroupLabel(usize),
    #[error("empty validation set")]
    EmptyValidation,
    #[error("no validation sample could be scored")]
    AllUnscorable,
    #[error("grid_size must be at least 2, got {0}")]
    InvalidGridSize(usize),
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Indices into the manifest, each list in manifest order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationSplit {
    pub validation: Vec<usize>,
    pub remainder: Vec<usize>,
}

/// Stratified split: within each group, a seeded shuffle picks
/// `round(fraction * group_size)` samples for validation.
pub fn split_validation<S: AsRef<str>>(
    groups: &[S],
    fraction: f64,
    seed: u64,
) -> Result<ValidationSplit, ThresholdError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ThresholdError::InvalidFraction(fraction));
    }
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.is_empty() {
            return Err(ThresholdError::EmptyGroupLabel(i));
        }
        by_group.entry(g).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; groups.len()];
    for members in by_group.values_mut() {
        let take = (fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..take.min(members.len())] {
            chosen[i] = true;
        }
    }
    let (validation, remainder) = (0..groups.len()).partition(|&i| chosen[i]);
    Ok(ValidationSplit {
        validation,
        remainder,
    })
}

/// What one validation sample contributes to the search.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// `None` when the sample could not be scored; it is then never denoised.
    pub score: Option<f64>,
    pub group: String,
    pub plain: WerResult,
    pub denoised: WerResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// `None` is the never-denoise sentinel.
    pub theta: Option<f64>,
    pub micro_wer: f64,
    pub awg: f64,
    pub feasible: bool,
    pub denoised_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearchResult {
    /// `None` means never denoise.
    pub threshold: Option<f64>,
    pub grid: Vec<GridPoint>,
    pub epsilon_wer_points: f64,
    pub chain_id: String,
    pub backend_id: String,
    pub score_mode: ScoreMode,
    pub validation_size: usize,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub group_attribute: String,
    #[serde(default)]
    pub seed: u64,
}

impl ThresholdSearchResult {
    pub fn chosen_point(&self) -> &GridPoint {
        self.grid
            .iter()
            .find(|p| p.theta == self.threshold)
            .expect("threshold is always a grid point")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSettings {
    pub chain_id: String,
    pub backend_id: String,
    pub score_mode: ScoreMode,
    pub epsilon_wer_points: f64,
    pub grid_size: usize,
}

/// True iff a threshold is set and `score` is strictly below it.
pub fn selective_denoise_decision(score: f64, threshold: Option<f64>) -> bool {
    threshold.is_some_and(|t| score < t)
}

/// Sample quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Candidate thresholds: quantiles of the scores at `grid_size` evenly
/// spaced levels from 0 to 1, ascending, duplicates removed.
pub fn quantile_grid(scores: &[f64], grid_size: usize) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (0..grid_size)
        .map(|i| quantile(&sorted, i as f64 / (grid_size - 1) as f64))
        .collect();
    out.dedup();
    out
}

fn evaluate(outcomes: &[SampleOutcome], theta: Option<f64>) -> Result<(f64, f64, usize), ThresholdError> {
    let mut denoised = 0;
    let per_sample: Vec<(&str, WerResult)> = outcomes
        .iter()
        .map(|o| {
            let use_denoised = o.score.is_some_and(|s| selective_denoise_decision(s, theta));
            denoised += use_denoised as usize;
            (o.group.as_str(), if use_denoised { o.denoised } else { o.plain })
        })
        .collect();
    let report = metrics::disparity_report(&per_sample, "", 0)?;
    let micro = report.micro_awer_percent.expect("set by disparity_report");
    Ok((micro, report.awg, denoised))
}

fn theta_key(theta: Option<f64>) -> f64 {
    theta.unwrap_or(f64::NEG_INFINITY)
}

/// Grid search minimizing AWG subject to micro WER staying within
/// `epsilon_wer_points` of the no-denoise baseline. Ties go to lower micro
/// WER, then fewer denoised samples, then the smaller threshold. The answer
/// stays `None` unless some feasible threshold strictly beats the baseline
/// AWG.
pub fn search_threshold(
    outcomes: &[SampleOutcome],
    settings: &SearchSettings,
) -> Result<ThresholdSearchResult, ThresholdError> {
    if outcomes.is_empty() {
        return Err(ThresholdError::EmptyValidation);
    }
    if settings.grid_size < 2 {
        return Err(ThresholdError::InvalidGridSize(settings.grid_size));
    }
    let eps = settings.epsilon_wer_points;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(ThresholdError::InvalidEpsilon(eps));
    }
    let scores: Vec<f64> = outcomes.iter().filter_map(|o| o.score).collect();
    if scores.is_empty() {
        return Err(ThresholdError::AllUnscorable);
    }

    let candidates: Vec<Option<f64>> = std::iter::once(None)
        .chain(quantile_grid(&scores, settings.grid_size).into_iter().map(Some))
        .collect();
    let mut grid = Vec::with_capacity(candidates.len());
    for theta in candidates {
        let (micro_wer, awg, denoised_count) = evaluate(outcomes, theta)?;
        grid.push(GridPoint {
            theta,
            micro_wer,
            awg,
            feasible: false,
            denoised_count,
        });
    }
    let baseline_micro = grid[0].micro_wer;
    let baseline_awg = grid[0].awg;
    for p in &mut grid {
        p.feasible = p.micro_wer <= baseline_micro + eps;
    }

    let best = grid
        .iter()
        .filter(|p| p.feasible)
        .min_by(|a, b| {
            a.awg
                .total_cmp(&b.awg)
                .then(a.micro_wer.total_cmp(&b.micro_wer))
                .then(a.denoised_count.cmp(&b.denoised_count))
                .then(theta_key(a.theta).total_cmp(&theta_key(b.theta)))
        })
        .expect("the baseline point is always feasible");
    let threshold = if best.awg.total_cmp(&baseline_awg) == Ordering::Less {
        best.theta
    } else {
        None
    };

    Ok(ThresholdSearchResult {
        threshold,
        grid,
        epsilon_wer_points: eps,
        chain_id: settings.chain_id.clone(),
        backend_id: settings.backend_id.clone(),
        score_mode: settings.score_mode,
        validation_size: outcomes.len(),
        dataset: String::new(),
        group_attribute: String::new(),
        seed: 0,
    })
}
