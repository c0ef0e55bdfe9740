use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selden::config::RunConfig;
use selden::manifest::{load_manifest, SampleRecord};
use selden::pipeline::{self, Pipeline, ThresholdFile};
use selden::report::{render_report, ReportFormat};

const EXIT_FATAL: u8 = 1;
const EXIT_SAMPLE_ERRORS: u8 = 2;

#[derive(Parser)]
#[command(name = "selden", version, about = "Selective denoising for ASR disparity evaluation")]
struct Cli {
    /// Worker threads (overrides the config)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for the validation split (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cache directory for denoised audio and transcripts (overrides the config)
    #[arg(long = "cache-dir", global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every sample's intelligibility
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a denoise chain to every sample
    Denoise {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        chain: String,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Transcribe every sample, optionally after denoising (JSONL on stdout)
    Transcribe {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        backend: String,
        #[arg(long)]
        chain: Option<String>,
    },
    /// Compare chains under universal denoising (markdown on stdout)
    Benchmark {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Learn a per-dataset threshold on the validation split
    SearchThreshold {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        chain: String,
        #[arg(long)]
        backend: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run selective denoising and write the report
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        chain: String,
        #[arg(long)]
        backend: String,
        #[arg(long = "threshold-file")]
        threshold_file: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Render a saved run report
    Report {
        #[arg(long = "run-dir")]
        run_dir: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
}

/// Error that aborts the command with exit code 1.
struct Fatal(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.into())
    }
}

struct Session {
    pipeline: Pipeline,
    records: Vec<SampleRecord>,
}

fn open(cli: &Cli, manifest: &Path, config: &Path) -> Result<Session, Fatal> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(dir) = &cli.cache_dir {
        cfg.cache_dir = dir.clone();
    }
    let records = load_manifest(manifest, &cfg.group_attribute)?;
    let pipeline = Pipeline::new(cfg)?;
    Ok(Session { pipeline, records })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Fatal> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
    Ok(())
}

fn status(errors: usize) -> u8 {
    if errors > 0 {
        eprintln!("{errors} sample(s) failed; see log output");
        EXIT_SAMPLE_ERRORS
    } else {
        0
    }
}

fn execute(cli: &Cli) -> Result<u8, Fatal> {
    match &cli.command {
        Command::Score {
            manifest,
            config,
            out,
        } => {
            let s = open(cli, manifest, config)?;
            let lines = s.pipeline.score(&s.records);
            for l in lines.iter().filter(|l| l.error.is_some()) {
                log::warn!("{}: {}", l.id, l.error.as_deref().unwrap_or_default());
            }
            write_file(out, &pipeline::to_jsonl(&lines))?;
            Ok(status(lines.iter().filter(|l| l.error.is_some()).count()))
        }
        Command::Denoise {
            manifest,
            config,
            chain,
            out_dir,
        } => {
            let s = open(cli, manifest, config)?;
            let results = s.pipeline.denoise_to(&s.records, chain, out_dir)?;
            let mut errors = 0;
            for (id, r) in &results {
                if let Err(e) = r {
                    log::warn!("{id}: {e}");
                    errors += 1;
                }
            }
            Ok(status(errors))
        }
        Command::Transcribe {
            manifest,
            config,
            backend,
            chain,
        } => {
            let s = open(cli, manifest, config)?;
            let results = s.pipeline.transcribe(&s.records, backend, chain.as_deref())?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let mut errors = 0;
            for (id, r) in results {
                match r {
                    Ok(rec) => writeln!(out, "{}", serde_json::to_string(&rec)?)?,
                    Err(e) => {
                        log::warn!("{id}: {e}");
                        errors += 1;
                    }
                }
            }
            Ok(status(errors))
        }
        Command::Benchmark { manifest, config } => {
            let s = open(cli, manifest, config)?;
            let chains = if s.pipeline.config().benchmark_chains.is_empty() {
                let registry = s.pipeline.config().registry()?;
                registry
                    .chain_ids()
                    .filter(|id| registry.resolve(id).is_ok())
                    .map(str::to_owned)
                    .collect()
            } else {
                s.pipeline.config().benchmark_chains.clone()
            };
            let report = s.pipeline.benchmark_report(&s.records, &chains)?;
            print!("{}", render_report(&report, ReportFormat::Markdown));
            Ok(status(report.errored_sample_ids.len()))
        }
        Command::SearchThreshold {
            manifest,
            config,
            chain,
            backend,
            out,
        } => {
            let s = open(cli, manifest, config)?;
            let (file, lines) = s.pipeline.search_thresholds(&s.records, chain, backend)?;
            write_file(out, &(serde_json::to_string_pretty(&file)? + "\n"))?;
            for r in &file.results {
                let t = r.threshold.map_or_else(|| "NONE".to_owned(), |t| format!("{t:.4}"));
                eprintln!("{}: threshold {t}", r.dataset);
            }
            Ok(status(lines.iter().filter(|l| l.error.is_some()).count()))
        }
        Command::Run {
            manifest,
            config,
            chain,
            backend,
            threshold_file,
            report,
        } => {
            let s = open(cli, manifest, config)?;
            let thresholds: Option<ThresholdFile> = match threshold_file {
                Some(p) => Some(
                    serde_json::from_str(&std::fs::read_to_string(p)?)
                        .map_err(|e| anyhow::anyhow!("threshold file {}: {e}", p.display()))?,
                ),
                None => None,
            };
            let output = s.pipeline.run_selective(&s.records, chain, backend, thresholds.as_ref())?;
            let dir = report
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            pipeline::write_run_artifacts(dir, &output)?;
            write_file(report, &render_report(&output.report, ReportFormat::Markdown))?;
            Ok(status(output.errored_count()))
        }
        Command::Report { run_dir, format } => {
            let report = pipeline::read_report(run_dir)?;
            print!("{}", render_report(&report, *format));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
