//! `evaluate`: score a run against its corpus and write the CSV report and
//! JSON summary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wasn_core::eval::{scene_metrics, summarize, CorpusSummary, EvalRow, NodeReferences, SceneReferences};
use wasn_core::io::read_wav;
use wasn_core::mask::Step;
use wasn_core::signal::TimeSignal;

use crate::corpus::Corpus;
use crate::enhance::{output_path, read_run};
use crate::{thread_pool, write_json, CliResult, CoreError, SceneFailure};

#[derive(Clone, Debug)]
pub struct EvaluateOptions {
    pub corpus: PathBuf,
    pub run: PathBuf,
    pub csv: PathBuf,
    pub summary: Option<PathBuf>,
    pub filter_len: usize,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub corpus_fingerprint: String,
    pub filter_len: usize,
    #[serde(flatten)]
    pub summary: CorpusSummary,
    pub failures: Vec<SceneFailure>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    pub summary: EvaluationSummary,
}

fn fit(sig: TimeSignal, len: usize) -> TimeSignal {
    if sig.len() == len {
        sig
    } else {
        sig.resized(len)
    }
}

fn evaluate_scene(corpus: &Corpus, run: &Path, id: &str, filter_len: usize) -> CliResult<Vec<EvalRow>> {
    let scene = corpus.scene(id)?;
    let audio = corpus.audio(id)?;
    let len = audio.mixtures[0][0].len();
    let mut nodes = Vec::with_capacity(audio.mixtures.len());
    let mut outputs = Vec::with_capacity(audio.mixtures.len());
    for (k, ((mix, s), n)) in audio
        .mixtures
        .into_iter()
        .zip(audio.speech_images)
        .zip(audio.noise_images)
        .enumerate()
    {
        let take0 = |mut v: Vec<TimeSignal>| v.swap_remove(0);
        nodes.push(NodeReferences {
            speech_image: take0(s),
            noise_image: take0(n),
            mixture: take0(mix),
            direct_delay: (scene.direct_delay(k, true), scene.direct_delay(k, false)),
        });
        let read = |step| -> CliResult<TimeSignal> { Ok(fit(read_wav(&output_path(run, id, k, step), 0)?, len)) };
        outputs.push([read(Step::One)?, read(Step::Two)?]);
    }
    let refs = SceneReferences {
        scene_id: id.to_string(),
        nodes,
        dry_target: audio.dry_target,
        dry_noise: audio.dry_noise,
    };
    Ok(scene_metrics(&refs, &outputs, filter_len)?)
}

pub fn write_csv(rows: &[EvalRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CoreError::Format(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CoreError::Format(format!("csv: {e}")))?;
    wasn_core::io::atomic_write(path, &bytes)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> CliResult<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CoreError::Format(format!("{}: {e}", path.display())))?;
    let rows = r
        .deserialize()
        .collect::<Result<Vec<EvalRow>, _>>()
        .map_err(|e| CoreError::Format(format!("{}: {e}", path.display())))?;
    Ok(rows)
}

pub fn run_evaluate(opts: &EvaluateOptions) -> CliResult<Evaluation> {
    let corpus = Corpus::open(&opts.corpus)?;
    let run = read_run(&opts.run)?;
    let fingerprint = corpus.fingerprint()?;
    if run.corpus_fingerprint != fingerprint {
        return Err(CoreError::Pairing(format!(
            "run {} was produced from a different corpus (fingerprint {} vs {})",
            opts.run.display(),
            run.corpus_fingerprint,
            fingerprint
        ))
        .into());
    }
    if let Some(missing) = run.scenes.iter().find(|id| !corpus.scene_ids().contains(id)) {
        return Err(CoreError::Pairing(format!("run scene {missing} is not in the corpus")).into());
    }

    let pool = thread_pool(opts.workers)?;
    let results: Vec<CliResult<Vec<EvalRow>>> = pool.install(|| {
        run.scenes
            .par_iter()
            .map(|id| evaluate_scene(&corpus, &opts.run, id, opts.filter_len))
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = run.failures.clone();
    for (id, r) in run.scenes.iter().zip(results) {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => {
                log::error!("scene {id}: {e}");
                failures.push(SceneFailure {
                    scene_id: id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    write_csv(&rows, &opts.csv)?;
    let summary = EvaluationSummary {
        corpus_fingerprint: fingerprint,
        filter_len: opts.filter_len,
        summary: summarize(&rows),
        failures,
    };
    if let Some(path) = &opts.summary {
        write_json(&summary, path)?;
    }
    Ok(Evaluation { rows, summary })
}
