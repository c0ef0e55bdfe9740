//! End-to-end orchestration: scoring, cached denoising and transcription,
//! the chain benchmark, threshold search and the selective run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asr::{self, AsrError, TranscriptCache, TranscriptRecord, Transcriber};
use crate::audio_io::{self, AudioError};
use crate::chain::{apply_chain, ChainError, ChainRegistry, DenoiseChain, NOISY_CHAIN_ID};
use crate::config::{ConfigError, RunConfig};
use crate::intelligibility::{stoi_like, IntelligibilityScore, ScoreError};
use crate::manifest::{SampleRecord, Split};
use crate::metrics::{self, GroupDisparityReport, MetricError, WerResult};
use crate::report::{
    BenchmarkRow, DatasetEvaluation, EvaluationReport, SampleLine, SampleRole, ThresholdSource,
};
use crate::textnorm::normalize;
use crate::threshold::{
    search_threshold, selective_denoise_decision, split_validation, SampleOutcome, SearchSettings,
    ThresholdError, ThresholdSearchResult,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("transcript cache: {0}")]
    Cache(#[source] AsrError),
    #[error("dataset `{dataset}`: {source}")]
    Threshold {
        dataset: String,
        #[source]
        source: ThresholdError,
    },
    #[error("dataset `{dataset}`: group `{group}` has no usable samples after exclusions")]
    EmptyGroup { dataset: String, group: String },
    #[error("dataset `{dataset}`: {source}")]
    Metric {
        dataset: String,
        #[source]
        source: MetricError,
    },
    #[error("no threshold for dataset `{dataset}`, backend `{backend}`, chain `{chain}` in threshold file")]
    MissingThreshold {
        dataset: String,
        backend: String,
        chain: String,
    },
    #[error("no samples to process")]
    NoSamples,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failure confined to one sample; recorded, never fatal for the run.
#[derive(Debug, Error)]
pub enum SampleError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Asr(#[from] AsrError),
    #[error("no ground-truth transcript")]
    MissingTranscript,
    #[error("ground-truth transcript is empty after normalization")]
    EmptyReference,
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Thresholds saved by `search-threshold`, one per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub results: Vec<ThresholdSearchResult>,
}

impl ThresholdFile {
    pub fn find(&self, dataset: &str, backend_id: &str, chain_id: &str) -> Option<&ThresholdSearchResult> {
        self.results
            .iter()
            .find(|r| r.dataset == dataset && r.backend_id == backend_id && r.chain_id == chain_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub id: String,
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<IntelligibilityScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: EvaluationReport,
    pub samples: Vec<SampleLine>,
}

impl RunOutput {
    pub fn errored_count(&self) -> usize {
        self.report.errored_sample_ids.len()
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Transcribed {
    text: String,
    wer: WerResult,
}

/// Shared state for one CLI invocation or library session.
pub struct Pipeline {
    config: RunConfig,
    registry: ChainRegistry,
    backends: BTreeMap<String, Arc<dyn Transcriber>>,
    cache: TranscriptCache,
    pool: rayon::ThreadPool,
    work_counter: AtomicUsize,
}

impl Pipeline {
    /// Validates the config, opens the transcript cache under `cache_dir`
    /// and registers every configured backend.
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let registry = config.registry()?;
        let cache = TranscriptCache::open(&config.cache_dir).map_err(PipelineError::Cache)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        let backends = config
            .backends
            .iter()
            .map(|b| (b.id.clone(), Arc::new(b.clone()) as Arc<dyn Transcriber>))
            .collect();
        Ok(Self {
            config,
            registry,
            backends,
            cache,
            pool,
            work_counter: AtomicUsize::new(0),
        })
    }

    /// Add or replace a backend, e.g. an in-process engine.
    pub fn register_backend(&mut self, backend: Arc<dyn Transcriber>) {
        self.backends.insert(backend.id().to_owned(), backend);
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn cache(&self) -> &TranscriptCache {
        &self.cache
    }

    pub fn resolve_chain(&self, id: &str) -> Result<DenoiseChain, PipelineError> {
        Ok(self.registry.resolve(id)?)
    }

    fn backend(&self, id: &str) -> Result<Arc<dyn Transcriber>, PipelineError> {
        self.backends
            .get(id)
            .cloned()
            .ok_or_else(|| PipelineError::UnknownBackend(id.to_owned()))
    }

    fn group_of<'r>(&self, record: &'r SampleRecord) -> &'r str {
        record.attribute(&self.config.group_attribute).unwrap_or("")
    }

    /// `Ok(None)` for audio that loads but cannot be scored (silent or too
    /// short); such samples are never denoised.
    fn try_score(&self, record: &SampleRecord) -> Result<Option<IntelligibilityScore>, SampleError> {
        let audio = audio_io::load_wav(&record.audio_path)?;
        match stoi_like(&audio, self.config.stft, self.config.score_mode) {
            Ok(s) => Ok(Some(s)),
            Err(ScoreError::Unscorable | ScoreError::TooShort { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn score_sample(&self, record: &SampleRecord) -> Result<IntelligibilityScore, SampleError> {
        let audio = audio_io::load_wav(&record.audio_path)?;
        Ok(stoi_like(&audio, self.config.stft, self.config.score_mode)?)
    }

    pub fn score(&self, records: &[SampleRecord]) -> Vec<ScoreLine> {
        self.pool.install(|| {
            records
                .par_iter()
                .map(|r| {
                    let (score, error) = match self.score_sample(r) {
                        Ok(s) => (Some(s), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    ScoreLine {
                        id: r.id.clone(),
                        dataset: r.dataset.clone(),
                        score,
                        error,
                    }
                })
                .collect()
        })
    }

    fn chain_fingerprint(chain: &DenoiseChain) -> String {
        let digest = Sha256::digest(format!("{:?}", chain.stages).as_bytes());
        hex::encode(&digest[..6])
    }

    /// Path of the audio the ASR should see for `record` under `chain`.
    /// The identity chain returns the original file untouched; other chains
    /// are computed once per (chain definition, input content) and cached.
    pub fn denoised_audio_path(&self, record: &SampleRecord, chain: &DenoiseChain) -> Result<PathBuf, SampleError> {
        if chain.is_identity() {
            if !record.audio_path.is_file() {
                return Err(AudioError::MissingFile(record.audio_path.display().to_string()).into());
            }
            return Ok(record.audio_path.clone());
        }
        let input_hash = asr::hash_file(&record.audio_path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                SampleError::Audio(AudioError::MissingFile(record.audio_path.display().to_string()))
            } else {
                SampleError::Io {
                    path: record.audio_path.clone(),
                    source: e,
                }
            }
        })?;
        let chain_dir = format!("{}-{}", sanitize(&chain.id), Self::chain_fingerprint(chain));
        let dir = self.config.cache_dir.join("denoised").join(&chain_dir);
        let target = dir.join(format!("{input_hash}.wav"));
        if target.is_file() {
            return Ok(target);
        }
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SampleError::Io { path, source }
        };
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let n = self.work_counter.fetch_add(1, Ordering::SeqCst);
        let workdir = self
            .config
            .cache_dir
            .join("work")
            .join(format!("{chain_dir}-{input_hash}-{}-{n}", std::process::id()));
        let audio = audio_io::load_wav(&record.audio_path)?;
        let result = apply_chain(chain, &audio, &workdir);
        let _ = std::fs::remove_dir_all(&workdir);
        let denoised = result?;
        let tmp = dir.join(format!(".{input_hash}.{}-{n}.tmp", std::process::id()));
        audio_io::write_wav(&denoised, &tmp)?;
        std::fs::rename(&tmp, &target).map_err(io_err(&target))?;
        Ok(target)
    }

    /// Write each sample's denoised audio to `out_dir/<id>.wav`.
    pub fn denoise_to(
        &self,
        records: &[SampleRecord],
        chain_id: &str,
        out_dir: &Path,
    ) -> Result<Vec<(String, Result<PathBuf, SampleError>)>, PipelineError> {
        let chain = self.resolve_chain(chain_id)?;
        std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
            path: out_dir.to_path_buf(),
            source,
        })?;
        Ok(self.pool.install(|| {
            records
                .par_iter()
                .map(|r| {
                    let result = self.denoised_audio_path(r, &chain).and_then(|src| {
                        let dest = out_dir.join(format!("{}.wav", sanitize(&r.id)));
                        std::fs::copy(&src, &dest)
                            .map(|_| dest.clone())
                            .map_err(|source| SampleError::Io { path: dest, source })
                    });
                    (r.id.clone(), result)
                })
                .collect()
        }))
    }

    fn transcribe_one(
        &self,
        record: &SampleRecord,
        backend: &dyn Transcriber,
        chain: &DenoiseChain,
    ) -> Result<TranscriptRecord, SampleError> {
        let path = self.denoised_audio_path(record, chain)?;
        let key = if chain.is_identity() { NOISY_CHAIN_ID } else { &chain.id };
        Ok(asr::cached_transcribe(&self.cache, backend, key, &record.id, &path)?)
    }

    /// Transcripts for every sample, optionally after a denoise chain.
    pub fn transcribe(
        &self,
        records: &[SampleRecord],
        backend_id: &str,
        chain_id: Option<&str>,
    ) -> Result<Vec<(String, Result<TranscriptRecord, SampleError>)>, PipelineError> {
        let backend = self.backend(backend_id)?;
        let chain = self.resolve_chain(chain_id.unwrap_or(NOISY_CHAIN_ID))?;
        Ok(self.pool.install(|| {
            records
                .par_iter()
                .map(|r| (r.id.clone(), self.transcribe_one(r, backend.as_ref(), &chain)))
                .collect()
        }))
    }

    fn reference_tokens(&self, record: &SampleRecord) -> Result<Vec<String>, SampleError> {
        let text = record.transcript.as_deref().ok_or(SampleError::MissingTranscript)?;
        let tokens = normalize(text, &self.config.normalization);
        if tokens.is_empty() {
            return Err(SampleError::EmptyReference);
        }
        Ok(tokens)
    }

    fn transcribe_and_score(
        &self,
        record: &SampleRecord,
        backend: &dyn Transcriber,
        chain: &DenoiseChain,
    ) -> Result<Transcribed, SampleError> {
        let reference = self.reference_tokens(record)?;
        let t = self.transcribe_one(record, backend, chain)?;
        let hypothesis = normalize(&t.text, &self.config.normalization);
        let wer = metrics::wer(&reference, &hypothesis).map_err(|_| SampleError::EmptyReference)?;
        Ok(Transcribed { text: t.text, wer })
    }

    /// Universal denoising with every chain and backend. Rows are sorted by
    /// AAWG, then AWER. The `noisy` baseline is always included.
    pub fn benchmark_chains(
        &self,
        records: &[SampleRecord],
        chain_ids: &[String],
    ) -> Result<(Vec<BenchmarkRow>, Vec<String>), PipelineError> {
        if records.is_empty() {
            return Err(PipelineError::NoSamples);
        }
        let mut ids: Vec<String> = vec![NOISY_CHAIN_ID.to_owned()];
        for id in chain_ids {
            if !ids.contains(id) {
                ids.push(id.clone());
            }
        }
        let chains = ids
            .iter()
            .map(|id| self.resolve_chain(id))
            .collect::<Result<Vec<_>, _>>()?;
        let declared: BTreeSet<&str> = records.iter().map(|r| self.group_of(r)).collect();

        let mut rows = Vec::new();
        let mut errored = BTreeSet::new();
        for (backend_id, backend) in &self.backends {
            for chain in &chains {
                let results: Vec<Result<Transcribed, SampleError>> = self.pool.install(|| {
                    records
                        .par_iter()
                        .map(|r| self.transcribe_and_score(r, backend.as_ref(), chain))
                        .collect()
                });
                let mut ok = Vec::new();
                let mut failed = 0;
                for (r, res) in records.iter().zip(results) {
                    match res {
                        Ok(t) => ok.push((self.group_of(r), t.wer)),
                        Err(e) => {
                            log::warn!("{} [{} / {}]: {e}", r.id, chain.id, backend_id);
                            errored.insert(r.id.clone());
                            failed += 1;
                        }
                    }
                }
                let report = self.checked_report("pooled", &declared, &ok, failed)?;
                rows.push(BenchmarkRow {
                    chain_id: chain.id.clone(),
                    backend_id: backend_id.clone(),
                    awer: report.micro_awer_percent.unwrap_or(f64::NAN),
                    aawg: report.awg,
                    evaluated: ok.len(),
                    errored: failed,
                });
            }
        }
        rows.sort_by(|a, b| {
            a.aawg
                .total_cmp(&b.aawg)
                .then(a.awer.total_cmp(&b.awer))
                .then_with(|| a.chain_id.cmp(&b.chain_id))
                .then_with(|| a.backend_id.cmp(&b.backend_id))
        });
        Ok((rows, errored.into_iter().collect()))
    }

    /// Benchmark wrapped as a report with no selective section.
    pub fn benchmark_report(&self, records: &[SampleRecord], chain_ids: &[String]) -> Result<EvaluationReport, PipelineError> {
        let (benchmark, errored) = self.benchmark_chains(records, chain_ids)?;
        Ok(EvaluationReport {
            benchmark,
            errored_sample_ids: errored,
            ..self.empty_report()
        })
    }

    fn empty_report(&self) -> EvaluationReport {
        EvaluationReport {
            group_attribute: self.config.group_attribute.clone(),
            seed: self.config.seed,
            score_mode: self.config.score_mode,
            epsilon_wer_points: self.config.epsilon_wer_points,
            datasets: Vec::new(),
            benchmark: Vec::new(),
            errored_sample_ids: Vec::new(),
        }
    }

    fn checked_report(
        &self,
        dataset: &str,
        declared: &BTreeSet<&str>,
        ok: &[(&str, WerResult)],
        errored: usize,
    ) -> Result<GroupDisparityReport, PipelineError> {
        let present: BTreeSet<&str> = ok.iter().map(|(g, _)| *g).collect();
        if let Some(g) = declared.iter().find(|g| !present.contains(*g)) {
            return Err(PipelineError::EmptyGroup {
                dataset: dataset.to_owned(),
                group: g.to_string(),
            });
        }
        metrics::disparity_report(ok, &self.config.group_attribute, errored).map_err(|source| {
            PipelineError::Metric {
                dataset: dataset.to_owned(),
                source,
            }
        })
    }

    fn by_dataset<'r>(&self, records: &'r [SampleRecord]) -> BTreeMap<&'r str, Vec<&'r SampleRecord>> {
        let mut map: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
        for r in records {
            map.entry(r.dataset.as_str()).or_default().push(r);
        }
        map
    }

    /// Validation and evaluation portions of one dataset. Explicit `split`
    /// labels win when any record has one (train samples are then unused);
    /// otherwise a seeded stratified split is drawn.
    fn split_dataset<'r>(
        &self,
        dataset: &str,
        records: &[&'r SampleRecord],
    ) -> Result<(Vec<&'r SampleRecord>, Vec<&'r SampleRecord>), PipelineError> {
        if records.iter().any(|r| r.split.is_some()) {
            let validation = records
                .iter()
                .filter(|r| r.split == Some(Split::Validation))
                .copied()
                .collect();
            let remainder = records
                .iter()
                .filter(|r| matches!(r.split, None | Some(Split::Test)))
                .copied()
                .collect();
            return Ok((validation, remainder));
        }
        let groups: Vec<&str> = records.iter().map(|r| self.group_of(r)).collect();
        let split = split_validation(&groups, self.config.validation_fraction, self.config.seed)
            .map_err(|source| PipelineError::Threshold {
                dataset: dataset.to_owned(),
                source,
            })?;
        Ok((
            split.validation.iter().map(|&i| records[i]).collect(),
            split.remainder.iter().map(|&i| records[i]).collect(),
        ))
    }

    fn search_dataset(
        &self,
        dataset: &str,
        validation: &[&SampleRecord],
        chain: &DenoiseChain,
        backend: &dyn Transcriber,
        lines: &mut Vec<SampleLine>,
    ) -> Result<ThresholdSearchResult, PipelineError> {
        let noisy = DenoiseChain::identity(NOISY_CHAIN_ID);
        let evaluated: Vec<_> = self.pool.install(|| {
            validation
                .par_iter()
                .map(|r| -> Result<_, SampleError> {
                    let score = self.try_score(r)?;
                    let plain = self.transcribe_and_score(r, backend, &noisy)?;
                    let denoised = self.transcribe_and_score(r, backend, chain)?;
                    Ok((score, plain, denoised))
                })
                .collect()
        });
        let mut outcomes = Vec::new();
        for (r, res) in validation.iter().zip(evaluated) {
            let group = self.group_of(r).to_owned();
            let mut line = SampleLine {
                dataset: dataset.to_owned(),
                id: r.id.clone(),
                group: group.clone(),
                role: SampleRole::Validation,
                score: None,
                denoised: false,
                plain_text: None,
                plain_wer: None,
                denoised_text: None,
                denoised_wer: None,
                selective_wer: None,
                error: None,
            };
            match res {
                Ok((score, plain, denoised)) => {
                    line.score = score.map(|s| s.score);
                    outcomes.push(SampleOutcome {
                        score: line.score,
                        group,
                        plain: plain.wer,
                        denoised: denoised.wer,
                    });
                    line.plain_text = Some(plain.text);
                    line.plain_wer = Some(plain.wer);
                    line.denoised_text = Some(denoised.text);
                    line.denoised_wer = Some(denoised.wer);
                }
                Err(e) => {
                    log::warn!("{} (validation): {e}", r.id);
                    line.error = Some(e.to_string());
                }
            }
            lines.push(line);
        }
        let settings = SearchSettings {
            chain_id: chain.id.clone(),
            backend_id: backend.id().to_owned(),
            score_mode: self.config.score_mode,
            epsilon_wer_points: self.config.epsilon_wer_points,
            grid_size: self.config.grid_size,
        };
        let mut result = search_threshold(&outcomes, &settings).map_err(|source| PipelineError::Threshold {
            dataset: dataset.to_owned(),
            source,
        })?;
        result.dataset = dataset.to_owned();
        result.group_attribute = self.config.group_attribute.clone();
        result.seed = self.config.seed;
        Ok(result)
    }

    /// Learn a threshold per dataset on its validation portion.
    pub fn search_thresholds(
        &self,
        records: &[SampleRecord],
        chain_id: &str,
        backend_id: &str,
    ) -> Result<(ThresholdFile, Vec<SampleLine>), PipelineError> {
        if records.is_empty() {
            return Err(PipelineError::NoSamples);
        }
        let chain = self.resolve_chain(chain_id)?;
        let backend = self.backend(backend_id)?;
        let mut results = Vec::new();
        let mut lines = Vec::new();
        for (dataset, members) in self.by_dataset(records) {
            let (validation, _) = self.split_dataset(dataset, &members)?;
            results.push(self.search_dataset(dataset, &validation, &chain, backend.as_ref(), &mut lines)?);
        }
        Ok((ThresholdFile { results }, lines))
    }

    /// Selective denoising evaluated against the no-denoise baseline on the
    /// non-validation portion of each dataset. Thresholds come from
    /// `thresholds` when given, otherwise from a fresh search.
    pub fn run_selective(
        &self,
        records: &[SampleRecord],
        chain_id: &str,
        backend_id: &str,
        thresholds: Option<&ThresholdFile>,
    ) -> Result<RunOutput, PipelineError> {
        if records.is_empty() {
            return Err(PipelineError::NoSamples);
        }
        let chain = self.resolve_chain(chain_id)?;
        let backend = self.backend(backend_id)?;
        let noisy = DenoiseChain::identity(NOISY_CHAIN_ID);
        let mut report = self.empty_report();
        let mut lines = Vec::new();
        let mut all_errored = BTreeSet::new();

        for (dataset, members) in self.by_dataset(records) {
            let (validation, remainder) = self.split_dataset(dataset, &members)?;
            let (threshold, source, search) = match thresholds {
                Some(file) => {
                    let found = file.find(dataset, backend_id, chain_id).ok_or_else(|| {
                        PipelineError::MissingThreshold {
                            dataset: dataset.to_owned(),
                            backend: backend_id.to_owned(),
                            chain: chain_id.to_owned(),
                        }
                    })?;
                    (found.threshold, ThresholdSource::File, None)
                }
                None => {
                    let r = self.search_dataset(dataset, &validation, &chain, backend.as_ref(), &mut lines)?;
                    (r.threshold, ThresholdSource::Search, Some(r))
                }
            };

            let evaluated: Vec<_> = self.pool.install(|| {
                remainder
                    .par_iter()
                    .map(|r| -> Result<_, SampleError> {
                        let score = self.try_score(r)?.map(|s| s.score);
                        let denoise = score.is_some_and(|s| selective_denoise_decision(s, threshold));
                        let plain = self.transcribe_and_score(r, backend.as_ref(), &noisy)?;
                        let denoised = if denoise {
                            Some(self.transcribe_and_score(r, backend.as_ref(), &chain)?)
                        } else {
                            None
                        };
                        Ok((score, denoise, plain, denoised))
                    })
                    .collect()
            });

            let declared: BTreeSet<&str> = remainder.iter().map(|r| self.group_of(r)).collect();
            let mut baseline = Vec::new();
            let mut selective = Vec::new();
            let mut errored = Vec::new();
            let mut denoised_count = 0;
            for (r, res) in remainder.iter().zip(evaluated) {
                let group = self.group_of(r);
                let mut line = SampleLine {
                    dataset: dataset.to_owned(),
                    id: r.id.clone(),
                    group: group.to_owned(),
                    role: SampleRole::Evaluation,
                    score: None,
                    denoised: false,
                    plain_text: None,
                    plain_wer: None,
                    denoised_text: None,
                    denoised_wer: None,
                    selective_wer: None,
                    error: None,
                };
                match res {
                    Ok((score, denoise, plain, denoised)) => {
                        let chosen = denoised.as_ref().map_or(plain.wer, |d| d.wer);
                        baseline.push((group, plain.wer));
                        selective.push((group, chosen));
                        denoised_count += denoise as usize;
                        line.score = score;
                        line.denoised = denoise;
                        line.plain_text = Some(plain.text);
                        line.plain_wer = Some(plain.wer);
                        line.denoised_wer = denoised.as_ref().map(|d| d.wer);
                        line.denoised_text = denoised.map(|d| d.text);
                        line.selective_wer = Some(chosen);
                    }
                    Err(e) => {
                        log::warn!("{}: {e}", r.id);
                        line.error = Some(e.to_string());
                        errored.push(r.id.clone());
                    }
                }
                lines.push(line);
            }

            let baseline_report = self.checked_report(dataset, &declared, &baseline, errored.len())?;
            let selective_report = self.checked_report(dataset, &declared, &selective, errored.len())?;
            let reduction = metrics::awg_reduction_percent(baseline_report.awg, selective_report.awg);
            all_errored.extend(errored.iter().cloned());
            report.datasets.push(DatasetEvaluation {
                dataset: dataset.to_owned(),
                backend_id: backend_id.to_owned(),
                chain_id: chain_id.to_owned(),
                validation_size: validation.len(),
                evaluation_size: remainder.len(),
                threshold,
                threshold_source: source,
                baseline: baseline_report,
                selective: selective_report,
                denoised_fraction: if baseline.is_empty() {
                    0.0
                } else {
                    denoised_count as f64 / baseline.len() as f64
                },
                reduction_percent: reduction,
                errored_sample_ids: errored,
                search,
            });
        }
        all_errored.extend(lines.iter().filter(|l| l.error.is_some()).map(|l| l.id.clone()));
        report.errored_sample_ids = all_errored.into_iter().collect();
        Ok(RunOutput {
            report,
            samples: lines,
        })
    }
}

/// Serialize records as JSON lines.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

/// Write `report.json` and `samples.jsonl` into `dir`.
pub fn write_run_artifacts(dir: &Path, output: &RunOutput) -> Result<(), PipelineError> {
    let io_err = |path: PathBuf| move |source| PipelineError::Io { path, source };
    std::fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
    let report_path = dir.join(REPORT_JSON);
    let json = serde_json::to_string_pretty(&output.report).expect("report serializes");
    std::fs::write(&report_path, json + "\n").map_err(io_err(report_path.clone()))?;
    let samples_path = dir.join(SAMPLES_JSONL);
    std::fs::write(&samples_path, to_jsonl(&output.samples)).map_err(io_err(samples_path.clone()))?;
    Ok(())
}

pub const REPORT_JSON: &str = "report.json";
pub const SAMPLES_JSONL: &str = "samples.jsonl";

/// Read a `report.json` written by [`write_run_artifacts`].
pub fn read_report(dir: &Path) -> Result<EvaluationReport, PipelineError> {
    let path = dir.join(REPORT_JSON);
    let text = std::fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io {
        path,
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}
