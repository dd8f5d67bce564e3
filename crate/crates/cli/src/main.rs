use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wasn_cli::corpus::SourceSpec;
use wasn_cli::enhance::{run_enhance, EnhanceOptions};
use wasn_cli::evaluate::{read_csv, run_evaluate, EvaluateOptions};
use wasn_cli::generate::{run_generate, snr_histogram, GenerateOptions};
use wasn_cli::{resolve_workers, CliError, CliResult, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL};
use wasn_core::eval::{format_table, Selector, DEFAULT_FILTER_LEN};
use wasn_core::mask::{IrmKind, MaskProvider};
use wasn_core::pipeline::{CompressedType, NoiseEstimate, PipelineConfig};
use wasn_core::scene::ConfigType;
use wasn_core::spatial::MaskPolicy;

#[derive(Parser)]
#[command(name = "wasn", version, about = "Ad-hoc microphone array simulation, distributed enhancement and evaluation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DISCO_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Local,
    Distant,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompressedArg {
    Target,
    Noise,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseEstimateArg {
    Filter,
    Residual,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, render and store a scene corpus.
    Generate {
        /// Scene configuration(s): random, living, meeting (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "random")]
        config: Vec<ConfigType>,
        /// Scenes per configuration.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "noise_dir", conflicts_with = "synthetic_fixtures")]
        speech_dir: Option<PathBuf>,
        #[arg(long, requires = "speech_dir")]
        noise_dir: Option<PathBuf>,
        /// Use bundled synthetic speech and speech-shaped noise.
        #[arg(long)]
        synthetic_fixtures: bool,
        /// Print a histogram of per-node input SIRs.
        #[arg(long)]
        snr_report: bool,
        /// Upper bound on the image-source reflection order.
        #[arg(long)]
        max_order: Option<usize>,
    },
    /// Run the two-step enhancement over a corpus.
    Enhance {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `oracle` or `dir:<path>` (masks under `<path>/masks/<scene>/`).
        #[arg(long, default_value = "oracle")]
        mask_provider: String,
        /// Mask provider for step 2 (defaults to --mask-provider).
        #[arg(long)]
        step2_mask_provider: Option<String>,
        #[arg(long, value_enum, default_value = "local")]
        mask_policy: PolicyArg,
        #[arg(long, value_enum, default_value = "target")]
        compressed: CompressedArg,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, value_enum, default_value = "filter")]
        noise_estimate: NoiseEstimateArg,
        /// Copy reference mixtures to the outputs instead of filtering.
        #[arg(long)]
        passthrough: bool,
    },
    /// Score a run against its corpus.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        run: PathBuf,
        /// CSV report path.
        #[arg(long)]
        out: PathBuf,
        /// JSON summary path.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FILTER_LEN)]
        filter_len: usize,
    },
    /// Print a table of aggregates from one or more evaluation CSVs.
    Report {
        /// `LABEL=path.csv`, repeatable.
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        /// Selectors to show (bo, bi, wi, all).
        #[arg(long, value_delimiter = ',', default_value = "bo,bi,wi")]
        selectors: Vec<String>,
    },
}

fn parse_provider(s: &str) -> CliResult<MaskProvider> {
    if s == "oracle" {
        return Ok(MaskProvider::OracleIrm { kind: IrmKind::Magnitude });
    }
    if let Some(path) = s.strip_prefix("dir:") {
        return Ok(MaskProvider::ExternalFile { root: PathBuf::from(path) });
    }
    Err(CliError::Config(format!("mask provider {s:?} is neither `oracle` nor `dir:<path>`")))
}

fn parse_selector(s: &str) -> CliResult<Selector> {
    Selector::ALL
        .into_iter()
        .find(|sel| sel.short() == s)
        .ok_or_else(|| CliError::Config(format!("unknown selector {s:?}")))
}

fn failures_code(n: usize) -> i32 {
    if n == 0 {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    let workers = resolve_workers(cli.workers);
    match cli.command {
        Command::Generate {
            config,
            n,
            seed,
            out,
            speech_dir,
            noise_dir,
            synthetic_fixtures,
            snr_report,
            max_order,
        } => {
            let sources = match (speech_dir, noise_dir, synthetic_fixtures) {
                (Some(speech_dir), Some(noise_dir), false) => SourceSpec::Directories { speech_dir, noise_dir },
                (None, None, true) => SourceSpec::Synthetic,
                _ => {
                    return Err(CliError::Config(
                        "give --speech-dir and --noise-dir, or --synthetic-fixtures".into(),
                    ))
                }
            };
            let summary = run_generate(&GenerateOptions {
                configs: config,
                n,
                seed,
                out,
                sources,
                max_order,
                workers,
            })?;
            if snr_report {
                print!("{}", snr_histogram(&summary.input_sirs));
            }
            log::info!("generated {} scenes, {} failed", summary.scenes.len(), summary.failures.len());
            Ok(failures_code(summary.failures.len()))
        }
        Command::Enhance {
            corpus,
            out,
            mask_provider,
            step2_mask_provider,
            mask_policy,
            compressed,
            mu,
            noise_estimate,
            passthrough,
        } => {
            let step1_masks = parse_provider(&mask_provider)?;
            let step2_masks = match step2_mask_provider {
                Some(s) => parse_provider(&s)?,
                None => step1_masks.clone(),
            };
            let pipeline = PipelineConfig {
                mask_policy: match mask_policy {
                    PolicyArg::Local => MaskPolicy::Local,
                    PolicyArg::Distant => MaskPolicy::Distant,
                },
                compressed: match compressed {
                    CompressedArg::Target => CompressedType::Target,
                    CompressedArg::Noise => CompressedType::Noise,
                    CompressedArg::Both => CompressedType::Both,
                },
                mu,
                noise_estimate: match noise_estimate {
                    NoiseEstimateArg::Filter => NoiseEstimate::Filter,
                    NoiseEstimateArg::Residual => NoiseEstimate::Residual,
                },
                step1_masks,
                step2_masks,
            };
            let manifest = run_enhance(&EnhanceOptions {
                corpus,
                out,
                pipeline,
                passthrough,
                workers,
            })?;
            log::info!("enhanced {} scenes, {} failed", manifest.scenes.len(), manifest.failures.len());
            Ok(failures_code(manifest.failures.len()))
        }
        Command::Evaluate {
            corpus,
            run,
            out,
            summary,
            filter_len,
        } => {
            let ev = run_evaluate(&EvaluateOptions {
                corpus,
                run,
                csv: out,
                summary,
                filter_len,
                workers,
            })?;
            log::info!("evaluated {} rows", ev.rows.len());
            Ok(failures_code(ev.summary.failures.len()))
        }
        Command::Report { runs, selectors } => {
            let selectors = selectors.iter().map(|s| parse_selector(s)).collect::<CliResult<Vec<_>>>()?;
            let mut tables = Vec::new();
            for r in &runs {
                let (label, path) = r
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("--run {r:?} is not LABEL=path")))?;
                tables.push((label.to_string(), read_csv(&PathBuf::from(path))?));
            }
            print!("{}", format_table(&tables, &selectors));
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
