//! `generate`: sample, render and store a scene corpus.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use wasn_core::fixtures::{speech_shaped_noise, synthetic_speech};
use wasn_core::io::{read_wav, store_mask, write_scene, write_wav, write_wav_channels, WavCodec};
use wasn_core::mask::{irm, mask_path, Step};
use wasn_core::room::{render_scene, sample_scene, RenderedScene, Scene};
use wasn_core::scene::ConfigType;
use wasn_core::signal::{TimeSignal, SAMPLE_RATE};
use wasn_core::Stft64;

use crate::corpus::{
    scene_id, CorpusManifest, SourceSpec, CORPUS_FILE, DRY_FILE, FIXTURES_DIR, FORMAT_VERSION, MIXTURE_FILE,
    NOISE_IMAGE_FILE, SCENES_DIR, SCENE_FILE, SPEECH_IMAGE_FILE,
};
use crate::{create_dir, thread_pool, write_json, CliError, CliResult, CoreError, SceneFailure};

pub const FIXTURE_SPEECH_COUNT: usize = 8;
pub const FIXTURE_NOISE_COUNT: usize = 4;
pub const FIXTURE_SPEECH_SECONDS: f64 = 5.0;
pub const FIXTURE_NOISE_SECONDS: f64 = 8.0;

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub configs: Vec<ConfigType>,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub sources: SourceSpec,
    pub max_order: Option<usize>,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub scenes: Vec<String>,
    /// Reference-mic input SIR of every node of every scene, dB.
    pub input_sirs: Vec<f64>,
    pub failures: Vec<SceneFailure>,
}

struct Job {
    id: String,
    config: ConfigType,
    seed: u64,
    speech: usize,
    noise: usize,
}

fn wav_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no WAV files in {}", dir.display())));
    }
    Ok(files)
}

fn write_fixtures(root: &Path) -> CliResult<(Vec<PathBuf>, Vec<PathBuf>)> {
    let dir = root.join(FIXTURES_DIR);
    create_dir(&dir)?;
    let fs_ = f64::from(SAMPLE_RATE);
    let mut speech = Vec::new();
    for j in 0..FIXTURE_SPEECH_COUNT {
        let p = dir.join(format!("speech_{j:02}.wav"));
        let x = synthetic_speech((FIXTURE_SPEECH_SECONDS * fs_) as usize, 1000 + j as u64);
        write_wav(&TimeSignal::at_pipeline_rate(x)?, &p, WavCodec::Float32)?;
        speech.push(p);
    }
    let mut noise = Vec::new();
    for j in 0..FIXTURE_NOISE_COUNT {
        let p = dir.join(format!("noise_{j:02}.wav"));
        let x = speech_shaped_noise((FIXTURE_NOISE_SECONDS * fs_) as usize, 2000 + j as u64);
        write_wav(&TimeSignal::at_pipeline_rate(x)?, &p, WavCodec::Float32)?;
        noise.push(p);
    }
    Ok((speech, noise))
}

fn display_path(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned()
}

fn node_major(signals: &[Vec<TimeSignal>]) -> Vec<TimeSignal> {
    signals.iter().flatten().cloned().collect()
}

fn store_scene(root: &Path, id: &str, scene: &Scene, rendered: &RenderedScene) -> CliResult<()> {
    let scenes = root.join(SCENES_DIR);
    let staging = scenes.join(format!(".{id}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| CoreError::io(&staging, e))?;
    }
    create_dir(&staging)?;
    write_scene(&scene.descriptor, &staging.join(SCENE_FILE))?;
    write_wav_channels(&node_major(&rendered.mixtures), &staging.join(MIXTURE_FILE), WavCodec::Float32)?;
    write_wav_channels(&node_major(&rendered.speech_images), &staging.join(SPEECH_IMAGE_FILE), WavCodec::Float32)?;
    write_wav_channels(&node_major(&rendered.noise_images), &staging.join(NOISE_IMAGE_FILE), WavCodec::Float32)?;
    write_wav_channels(
        &[rendered.dry_target.clone(), rendered.dry_noise.clone()],
        &staging.join(DRY_FILE),
        WavCodec::Float32,
    )?;

    let mask_staging = root.join("masks").join(format!(".{id}.partial"));
    if mask_staging.exists() {
        fs::remove_dir_all(&mask_staging).map_err(|e| CoreError::io(&mask_staging, e))?;
    }
    create_dir(&mask_staging)?;
    let stft = Stft64::default();
    for k in 0..rendered.mixtures.len() {
        let s = stft.analyze(&rendered.speech_images[k][0])?;
        let n = stft.analyze(&rendered.noise_images[k][0])?;
        let m = irm(&s, &n)?;
        for step in [Step::One, Step::Two] {
            let p = mask_path(Path::new(""), id, k, step);
            store_mask(&m, &mask_staging.join(p.file_name().expect("mask file name")))?;
        }
    }

    let publish = |from: &Path, to: &Path| -> CliResult<()> {
        if to.exists() {
            fs::remove_dir_all(to).map_err(|e| CoreError::io(to, e))?;
        }
        fs::rename(from, to).map_err(|e| CoreError::io(to, e))?;
        Ok(())
    };
    publish(&staging, &scenes.join(id))?;
    publish(&mask_staging, &root.join("masks").join(id))?;
    Ok(())
}

fn run_job(
    job: &Job,
    opts: &GenerateOptions,
    speech_files: &[PathBuf],
    noise_files: &[PathBuf],
) -> CliResult<Vec<f64>> {
    let mut desc = sample_scene(job.config, job.seed)?;
    let (sp, np) = (&speech_files[job.speech], &noise_files[job.noise]);
    desc.speech_path = display_path(sp, &opts.out);
    desc.noise_path = display_path(np, &opts.out);
    let scene = Scene::new(desc, opts.max_order)?;
    let rendered = render_scene(&scene, &read_wav(sp, 0)?, &read_wav(np, 0)?)?;
    store_scene(&opts.out, &job.id, &scene, &rendered)?;
    Ok(rendered.input_sir_db.clone())
}

pub fn run_generate(opts: &GenerateOptions) -> CliResult<GenerateSummary> {
    if opts.configs.is_empty() || opts.n == 0 {
        return Err(CliError::Config("nothing to generate (need at least one config and --n > 0)".into()));
    }
    create_dir(&opts.out)?;
    create_dir(&opts.out.join(SCENES_DIR))?;
    create_dir(&opts.out.join("masks"))?;
    let (speech_files, noise_files) = match &opts.sources {
        SourceSpec::Synthetic => write_fixtures(&opts.out)?,
        SourceSpec::Directories { speech_dir, noise_dir } => (wav_files(speech_dir)?, wav_files(noise_dir)?),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut jobs = Vec::new();
    for &config in &opts.configs {
        for i in 0..opts.n {
            jobs.push(Job {
                id: scene_id(config, i),
                config,
                seed: rng.random(),
                speech: rng.random_range(0..speech_files.len()),
                noise: rng.random_range(0..noise_files.len()),
            });
        }
    }

    let pool = thread_pool(opts.workers)?;
    let results: Vec<CliResult<Vec<f64>>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(j, opts, &speech_files, &noise_files)).collect());

    let mut summary = GenerateSummary {
        scenes: Vec::new(),
        input_sirs: Vec::new(),
        failures: Vec::new(),
    };
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(sirs) => {
                summary.scenes.push(job.id.clone());
                summary.input_sirs.extend(sirs);
            }
            Err(e) => {
                log::error!("scene {}: {e}", job.id);
                summary.failures.push(SceneFailure {
                    scene_id: job.id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }

    let manifest = CorpusManifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        configs: opts.configs.clone(),
        n_per_config: opts.n,
        seed: opts.seed,
        sources: opts.sources.clone(),
        max_order: opts.max_order,
        scenes: summary.scenes.clone(),
        failures: summary.failures.clone(),
    };
    write_json(&manifest, &opts.out.join(CORPUS_FILE))?;
    Ok(summary)
}

/// Text histogram of input SIRs in 2 dB bins over [−20, 20) dB, with
/// under/overflow rows and the share inside [−10, 10] dB.
pub fn snr_histogram(sirs: &[f64]) -> String {
    let mut out = String::new();
    let edges: Vec<f64> = (0..=20).map(|i| -20.0 + 2.0 * i as f64).collect();
    let mut counts = vec![0usize; edges.len() + 1];
    for &v in sirs {
        let idx = edges.iter().position(|&e| v < e).unwrap_or(edges.len());
        counts[idx] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(0).max(1);
    let bar = |c: usize| "#".repeat((c * 50).div_ceil(peak));
    let _ = writeln!(out, "{:>16} {:>6}  {}", "< -20", counts[0], bar(counts[0]));
    for i in 0..edges.len() - 1 {
        let label = format!("[{:+.0}, {:+.0})", edges[i], edges[i + 1]);
        let _ = writeln!(out, "{label:>16} {:>6}  {}", counts[i + 1], bar(counts[i + 1]));
    }
    let last = *counts.last().expect("overflow bin");
    let _ = writeln!(out, "{:>16} {:>6}  {}", ">= 20", last, bar(last));
    let inside = sirs.iter().filter(|v| (-10.0..=10.0).contains(*v)).count();
    let share = if sirs.is_empty() { 0.0 } else { 100.0 * inside as f64 / sirs.len() as f64 };
    let _ = writeln!(out, "{inside} of {} node input SIRs ({share:.1} %) within [-10, 10] dB", sirs.len());
    out
}
