//! Word error rate and group disparity arithmetic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty reference transcript")]
    EmptyReference,
    #[error("cannot take the median of an empty list")]
    EmptyValues,
    #[error("group {0:?} has no samples")]
    EmptyGroup(String),
    #[error("no samples to aggregate")]
    NoSamples,
}

/// Edit counts from one optimal word alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerResult {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_len: usize,
    pub wer_percent: f64,
}

impl WerResult {
    pub fn from_counts(
        substitutions: usize,
        insertions: usize,
        deletions: usize,
        reference_len: usize,
    ) -> Result<Self, MetricError> {
        if reference_len == 0 {
            return Err(MetricError::EmptyReference);
        }
        let errors = substitutions + insertions + deletions;
        Ok(Self {
            substitutions,
            insertions,
            deletions,
            reference_len,
            wer_percent: 100.0 * errors as f64 / reference_len as f64,
        })
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Levenshtein alignment over tokens with unit costs.
///
/// The backtrace walks from the end and, among equally cheap moves, takes a
/// match first, then substitution, then insertion, then deletion.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerResult, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        cost[i * width] = i;
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let up = cost[(i - 1) * width + j] + 1;
            let left = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(up).min(left);
        }
    }

    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let diag = cost[(i - 1) * width + j - 1];
            if reference[i - 1] == hypothesis[j - 1] && here == diag {
                i -= 1;
                j -= 1;
                continue;
            }
            if here == diag + 1 {
                s += 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == cost[i * width + j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    WerResult::from_counts(s, ins, del, n)
}

/// Middle element of the sorted values; mean of the two middles when even.
pub fn median_wer(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyValues);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Pooled WER: `100 * sum(errors) / sum(reference_len)`.
pub fn micro_awer(per_sample: &[WerResult]) -> Result<f64, MetricError> {
    if per_sample.is_empty() {
        return Err(MetricError::NoSamples);
    }
    let errors: usize = per_sample.iter().map(WerResult::errors).sum();
    let words: usize = per_sample.iter().map(|w| w.reference_len).sum();
    Ok(100.0 * errors as f64 / words as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub count: usize,
    pub median_wer_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDisparityReport {
    pub attribute: String,
    pub groups: BTreeMap<String, GroupStats>,
    /// Largest gap between any two group medians; for two groups this is
    /// `|median(A) - median(B)|`.
    pub awg: f64,
    pub micro_awer_percent: Option<f64>,
    pub errored_samples: usize,
}

/// Per-group medians and the absolute word error gap.
///
/// `declared_groups` lists groups that must be present; pass an empty slice
/// to accept whatever labels appear.
pub fn awg<S: AsRef<str>>(
    samples: &[(S, f64)],
    attribute: &str,
    declared_groups: &[S],
) -> Result<GroupDisparityReport, MetricError> {
    let mut by_group: BTreeMap<String, Vec<f64>> = declared_groups
        .iter()
        .map(|g| (g.as_ref().to_owned(), Vec::new()))
        .collect();
    for (g, w) in samples {
        by_group.entry(g.as_ref().to_owned()).or_default().push(*w);
    }
    if by_group.is_empty() {
        return Err(MetricError::NoSamples);
    }
    let mut groups = BTreeMap::new();
    for (g, values) in &by_group {
        if values.is_empty() {
            return Err(MetricError::EmptyGroup(g.clone()));
        }
        groups.insert(
            g.clone(),
            GroupStats {
                count: values.len(),
                median_wer_percent: median_wer(values)?,
            },
        );
    }
    let medians = groups.values().map(|s| s.median_wer_percent);
    let hi = medians.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = medians.fold(f64::INFINITY, f64::min);
    Ok(GroupDisparityReport {
        attribute: attribute.to_owned(),
        groups,
        awg: hi - lo,
        micro_awer_percent: None,
        errored_samples: 0,
    })
}

/// Group report with micro AWER attached, from per-sample WER results.
pub fn disparity_report<S: AsRef<str>>(
    samples: &[(S, WerResult)],
    attribute: &str,
    errored_samples: usize,
) -> Result<GroupDisparityReport, MetricError> {
    let flat: Vec<(&str, f64)> = samples
        .iter()
        .map(|(g, w)| (g.as_ref(), w.wer_percent))
        .collect();
    let mut report = awg(&flat, attribute, &[])?;
    let results: Vec<WerResult> = samples.iter().map(|(_, w)| *w).collect();
    report.micro_awer_percent = Some(micro_awer(&results)?);
    report.errored_samples = errored_samples;
    Ok(report)
}

/// Relative AWG reduction in percent, rounded to the nearest integer.
/// `None` when the baseline gap is zero (undefined).
pub fn awg_reduction_percent(baseline_awg: f64, selective_awg: f64) -> Option<i64> {
    if baseline_awg <= 0.0 || !baseline_awg.is_finite() || !selective_awg.is_finite() {
        return None;
    }
    Some((100.0 * (baseline_awg - selective_awg) / baseline_awg).round() as i64)
}

/// Display form of [`awg_reduction_percent`]: `"71%"` or `"n/a"`.
pub fn format_reduction(reduction: Option<i64>) -> String {
    match reduction {
        Some(p) => format!("{p}%"),
        None => "n/a".to_owned(),
    }
}
