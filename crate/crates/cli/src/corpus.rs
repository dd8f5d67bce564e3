//! On-disk corpus layout.
//!
//! ```text
//! <corpus>/corpus.json
//! <corpus>/fixtures/{speech,noise}_NN.wav        (synthetic sources only)
//! <corpus>/scenes/<scene_id>/scene.json
//! <corpus>/scenes/<scene_id>/mixture.wav         (K·M channels, node-major)
//! <corpus>/scenes/<scene_id>/speech_image.wav
//! <corpus>/scenes/<scene_id>/noise_image.wav
//! <corpus>/scenes/<scene_id>/dry.wav             (target, gained noise)
//! <corpus>/masks/<scene_id>/node<k>_step<s>.msk  (oracle IRMs)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wasn_core::io::{read_scene, read_wav_channels};
use wasn_core::room::Scene;
use wasn_core::scene::{ConfigType, SceneDescriptor, MICS_PER_NODE};
use wasn_core::signal::TimeSignal;

use crate::{read_json, CliError, CliResult, CoreError};

pub const CORPUS_FILE: &str = "corpus.json";
pub const SCENES_DIR: &str = "scenes";
pub const FIXTURES_DIR: &str = "fixtures";
pub const SCENE_FILE: &str = "scene.json";
pub const MIXTURE_FILE: &str = "mixture.wav";
pub const SPEECH_IMAGE_FILE: &str = "speech_image.wav";
pub const NOISE_IMAGE_FILE: &str = "noise_image.wav";
pub const DRY_FILE: &str = "dry.wav";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Synthetic,
    Directories { speech_dir: PathBuf, noise_dir: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub configs: Vec<ConfigType>,
    pub n_per_config: usize,
    pub seed: u64,
    pub sources: SourceSpec,
    pub max_order: Option<usize>,
    pub scenes: Vec<String>,
    pub failures: Vec<crate::SceneFailure>,
}

/// All signals of one rendered scene, indexed `[node][mic]`.
#[derive(Clone, Debug)]
pub struct SceneAudio {
    pub mixtures: Vec<Vec<TimeSignal>>,
    pub speech_images: Vec<Vec<TimeSignal>>,
    pub noise_images: Vec<Vec<TimeSignal>>,
    pub dry_target: TimeSignal,
    pub dry_noise: TimeSignal,
}

pub struct Corpus {
    pub root: PathBuf,
    pub manifest: CorpusManifest,
}

pub fn scene_id(config: ConfigType, index: usize) -> String {
    format!("{}_{index:05}", config.name())
}

fn split_nodes(channels: Vec<TimeSignal>) -> Vec<Vec<TimeSignal>> {
    let mut nodes = Vec::new();
    let mut it = channels.into_iter().peekable();
    while it.peek().is_some() {
        nodes.push(it.by_ref().take(MICS_PER_NODE).collect());
    }
    nodes
}

impl Corpus {
    pub fn open(root: &Path) -> CliResult<Self> {
        let path = root.join(CORPUS_FILE);
        if !path.is_file() {
            return Err(CliError::Config(format!("no corpus at {} (missing {CORPUS_FILE})", root.display())));
        }
        let manifest: CorpusManifest = read_json(&path)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "corpus format {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn scene_ids(&self) -> &[String] {
        &self.manifest.scenes
    }

    pub fn scene_dir(&self, id: &str) -> PathBuf {
        self.root.join(SCENES_DIR).join(id)
    }

    pub fn descriptor(&self, id: &str) -> CliResult<SceneDescriptor> {
        Ok(read_scene(&self.scene_dir(id).join(SCENE_FILE))?)
    }

    pub fn scene(&self, id: &str) -> CliResult<Scene> {
        Ok(Scene::new(self.descriptor(id)?, self.manifest.max_order)?)
    }

    pub fn mixtures(&self, id: &str) -> CliResult<Vec<Vec<TimeSignal>>> {
        Ok(split_nodes(read_wav_channels(&self.scene_dir(id).join(MIXTURE_FILE))?))
    }

    pub fn audio(&self, id: &str) -> CliResult<SceneAudio> {
        let dir = self.scene_dir(id);
        let mut dry = read_wav_channels(&dir.join(DRY_FILE))?;
        if dry.len() != 2 {
            return Err(CoreError::Format(format!("{}: expected 2 channels, found {}", dir.join(DRY_FILE).display(), dry.len())).into());
        }
        let dry_noise = dry.pop().expect("two channels");
        let dry_target = dry.pop().expect("two channels");
        Ok(SceneAudio {
            mixtures: self.mixtures(id)?,
            speech_images: split_nodes(read_wav_channels(&dir.join(SPEECH_IMAGE_FILE))?),
            noise_images: split_nodes(read_wav_channels(&dir.join(NOISE_IMAGE_FILE))?),
            dry_target,
            dry_noise,
        })
    }

    /// SHA-256 over the corpus manifest and every scene descriptor, in
    /// scene order. Descriptors carry the seeds, so this pins the audio too.
    pub fn fingerprint(&self) -> CliResult<String> {
        let mut h = Sha256::new();
        let read = |p: &Path| std::fs::read(p).map_err(|e| CliError::from(CoreError::io(p, e)));
        h.update(read(&self.root.join(CORPUS_FILE))?);
        for id in self.scene_ids() {
            h.update(id.as_bytes());
            h.update(read(&self.scene_dir(id).join(SCENE_FILE))?);
        }
        Ok(format!("{:x}", h.finalize()))
    }
}
