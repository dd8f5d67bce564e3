//! `enhance`: run the two-step pipeline over every scene of a corpus.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wasn_core::io::{write_wav, WavCodec};
use wasn_core::mask::{MaskProvider, Step};
use wasn_core::pipeline::{run_pipeline, PipelineConfig, SceneInput};
use wasn_core::scene::N_NODES;
use wasn_core::signal::TimeSignal;

use crate::corpus::Corpus;
use crate::{absolute, create_dir, read_json, thread_pool, write_json, CliError, CliResult, SceneFailure};

pub const RUN_FILE: &str = "run.json";
pub const ENHANCED_DIR: &str = "enhanced";
pub const MANIFESTS_DIR: &str = "manifests";

#[derive(Clone, Debug)]
pub struct EnhanceOptions {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub pipeline: PipelineConfig,
    /// Copy each node's reference mixture to both outputs instead of filtering.
    pub passthrough: bool,
    pub workers: usize,
}

/// Everything needed to reproduce a run, stored as `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub corpus: PathBuf,
    pub corpus_fingerprint: String,
    pub pipeline: PipelineConfig,
    pub passthrough: bool,
    pub scenes: Vec<String>,
    pub failures: Vec<SceneFailure>,
}

pub fn output_path(run: &Path, scene_id: &str, node: usize, step: Step) -> PathBuf {
    run.join(ENHANCED_DIR)
        .join(format!("{scene_id}_node{}_step{}.wav", node + 1, step.number()))
}

pub fn read_run(run: &Path) -> CliResult<RunManifest> {
    let path = run.join(RUN_FILE);
    if !path.is_file() {
        return Err(CliError::Config(format!("no run at {} (missing {RUN_FILE})", run.display())));
    }
    read_json(&path)
}

fn needs_clean_images(p: &MaskProvider) -> bool {
    matches!(p, MaskProvider::OracleIrm { .. })
}

fn enhance_scene(corpus: &Corpus, id: &str, opts: &EnhanceOptions) -> CliResult<()> {
    let outputs: Vec<[TimeSignal; 2]> = if opts.passthrough {
        corpus
            .mixtures(id)?
            .into_iter()
            .map(|mut mics| {
                let r = mics.swap_remove(0);
                [r.clone(), r]
            })
            .collect()
    } else {
        let cfg = &opts.pipeline;
        let (mixtures, speech_refs, noise_refs) =
            if needs_clean_images(&cfg.step1_masks) || needs_clean_images(&cfg.step2_masks) {
                let audio = corpus.audio(id)?;
                let first = |v: Vec<Vec<TimeSignal>>| v.into_iter().map(|mut m| m.swap_remove(0)).collect::<Vec<_>>();
                (audio.mixtures, Some(first(audio.speech_images)), Some(first(audio.noise_images)))
            } else {
                (corpus.mixtures(id)?, None, None)
            };
        let input = SceneInput {
            scene_id: id.to_string(),
            mixtures,
            speech_refs,
            noise_refs,
        };
        let out = run_pipeline(&input, cfg)?;
        write_json(&out.manifest, &opts.out.join(MANIFESTS_DIR).join(format!("{id}.json")))?;
        out.step1.into_iter().zip(out.step2).map(|(a, b)| [a, b]).collect()
    };
    for (k, pair) in outputs.iter().enumerate() {
        for (sig, step) in pair.iter().zip([Step::One, Step::Two]) {
            write_wav(sig, &output_path(&opts.out, id, k, step), WavCodec::Float32)?;
        }
    }
    Ok(())
}

/// Runs every scene; per-scene failures are collected, not fatal.
pub fn run_enhance(opts: &EnhanceOptions) -> CliResult<RunManifest> {
    let corpus = Corpus::open(&opts.corpus)?;
    opts.pipeline.validate()?;
    let ids = corpus.scene_ids().to_vec();
    if !opts.passthrough {
        opts.pipeline.step1_masks.preflight(&ids, N_NODES, Step::One)?;
        opts.pipeline.step2_masks.preflight(&ids, N_NODES, Step::Two)?;
    }
    let fingerprint = corpus.fingerprint()?;
    create_dir(&opts.out.join(ENHANCED_DIR))?;
    create_dir(&opts.out.join(MANIFESTS_DIR))?;

    let pool = thread_pool(opts.workers)?;
    let results: Vec<CliResult<()>> = pool.install(|| ids.par_iter().map(|id| enhance_scene(&corpus, id, opts)).collect());
    let mut scenes = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(()) => scenes.push(id.clone()),
            Err(e) => {
                log::error!("scene {id}: {e}");
                failures.push(SceneFailure {
                    scene_id: id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        corpus: absolute(&opts.corpus),
        corpus_fingerprint: fingerprint,
        pipeline: opts.pipeline.clone(),
        passthrough: opts.passthrough,
        scenes,
        failures,
    };
    write_json(&manifest, &opts.out.join(RUN_FILE))?;
    Ok(manifest)
}
