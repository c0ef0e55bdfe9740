//! Evaluation reports and their markdown / CSV renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::intelligibility::ScoreMode;
use crate::metrics::{format_reduction, GroupDisparityReport, WerResult};
use crate::threshold::ThresholdSearchResult;

/// One chain/backend row of the universal-denoising comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub chain_id: String,
    pub backend_id: String,
    pub awer: f64,
    pub aawg: f64,
    pub evaluated: usize,
    pub errored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    Search,
    File,
}

/// Baseline against selective denoising on one dataset's evaluation portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEvaluation {
    pub dataset: String,
    pub backend_id: String,
    pub chain_id: String,
    pub validation_size: usize,
    pub evaluation_size: usize,
    pub threshold: Option<f64>,
    pub threshold_source: ThresholdSource,
    pub baseline: GroupDisparityReport,
    pub selective: GroupDisparityReport,
    pub denoised_fraction: f64,
    pub reduction_percent: Option<i64>,
    pub errored_sample_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<ThresholdSearchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub group_attribute: String,
    pub seed: u64,
    pub score_mode: ScoreMode,
    pub epsilon_wer_points: f64,
    #[serde(default)]
    pub datasets: Vec<DatasetEvaluation>,
    #[serde(default)]
    pub benchmark: Vec<BenchmarkRow>,
    #[serde(default)]
    pub errored_sample_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleRole {
    Validation,
    Evaluation,
}

/// Per-sample audit line written next to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLine {
    pub dataset: String,
    pub id: String,
    pub group: String,
    pub role: SampleRole,
    pub score: Option<f64>,
    pub denoised: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plain_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plain_wer: Option<WerResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoised_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoised_wer: Option<WerResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selective_wer: Option<WerResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format `{other}` (expected markdown or csv)")),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.2}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), num)
}

fn threshold_text(t: Option<f64>) -> String {
    t.map_or_else(|| "NONE".to_owned(), num)
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

fn render_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation report\n");
    let _ = writeln!(
        out,
        "Group attribute: `{}`. Seed: {}. Score mode: {}. WER budget: {} points.\n",
        report.group_attribute,
        report.seed,
        report.score_mode,
        num(report.epsilon_wer_points)
    );

    out.push_str("## Selective denoising\n\n");
    out.push_str("| Dataset | Backend | Chain | Baseline WER | Baseline AWG | Selective WER | Selective AWG | Reduction | Threshold | Denoised | Validation | Evaluation |\n");
    out.push_str("|---|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for d in &report.datasets {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {}% | {} | {} |",
            d.dataset,
            d.backend_id,
            d.chain_id,
            opt_num(d.baseline.micro_awer_percent),
            num(d.baseline.awg),
            opt_num(d.selective.micro_awer_percent),
            num(d.selective.awg),
            format_reduction(d.reduction_percent),
            threshold_text(d.threshold),
            num(100.0 * d.denoised_fraction),
            d.validation_size,
            d.evaluation_size,
        );
    }

    if !report.datasets.is_empty() {
        out.push_str("\n## Groups\n\n");
        out.push_str("| Dataset | Group | Samples | Baseline median WER | Selective median WER |\n");
        out.push_str("|---|---|---:|---:|---:|\n");
        for d in &report.datasets {
            for (g, base) in &d.baseline.groups {
                let sel = d.selective.groups.get(g).map(|s| s.median_wer_percent);
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    d.dataset,
                    g,
                    base.count,
                    num(base.median_wer_percent),
                    opt_num(sel)
                );
            }
        }
    }

    out.push_str("\n## Chain benchmark\n\n");
    out.push_str("| Chain | Backend | AWER | AAWG | Evaluated | Errored |\n");
    out.push_str("|---|---|---:|---:|---:|---:|\n");
    for r in &report.benchmark {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            r.chain_id,
            r.backend_id,
            num(r.awer),
            num(r.aawg),
            r.evaluated,
            r.errored
        );
    }

    if !report.errored_sample_ids.is_empty() {
        out.push_str("\n## Errored samples\n\n");
        for id in &report.errored_sample_ids {
            let _ = writeln!(out, "- {id}");
        }
    }
    out
}

pub const SELECTIVE_CSV_HEADER: [&str; 10] = [
    "dataset",
    "backend",
    "chain",
    "baseline_wer",
    "baseline_awg",
    "selective_wer",
    "selective_awg",
    "reduction_percent",
    "threshold",
    "denoised_percent",
];

pub const BENCHMARK_CSV_HEADER: [&str; 6] = ["chain", "backend", "awer", "aawg", "evaluated", "errored"];

fn csv_block<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Two CSV tables separated by a blank line: the selective comparison, then
/// the chain benchmark. Each has its own header row.
fn render_csv(report: &EvaluationReport) -> String {
    let selective = csv_block(
        &SELECTIVE_CSV_HEADER,
        report.datasets.iter().map(|d| {
            vec![
                d.dataset.clone(),
                d.backend_id.clone(),
                d.chain_id.clone(),
                opt_num(d.baseline.micro_awer_percent),
                num(d.baseline.awg),
                opt_num(d.selective.micro_awer_percent),
                num(d.selective.awg),
                d.reduction_percent.map_or_else(|| "n/a".to_owned(), |p| p.to_string()),
                threshold_text(d.threshold),
                num(100.0 * d.denoised_fraction),
            ]
        }),
    );
    let benchmark = csv_block(
        &BENCHMARK_CSV_HEADER,
        report.benchmark.iter().map(|r| {
            vec![
                r.chain_id.clone(),
                r.backend_id.clone(),
                num(r.awer),
                num(r.aawg),
                r.evaluated.to_string(),
                r.errored.to_string(),
            ]
        }),
    );
    format!("{selective}\n{benchmark}")
}
