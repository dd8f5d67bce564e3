use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report. Each variant carries enough context
/// for a batch runner to log a machine-readable reason.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported sample rate {found} Hz (expected {expected} Hz)")]
    Rate { found: u32, expected: u32 },

    #[error("size error: {0}")]
    Size(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: usize, found: usize },

    #[error("validation error: {constraint}: {detail}")]
    Validation {
        constraint: &'static str,
        detail: String,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("infeasible room: absorption {alpha:.4} > 1 for rt60 {rt60} s")]
    Infeasible { alpha: f64, rt60: f64 },

    #[error("scene sampling exhausted {attempts} attempts for config {config}")]
    Sampling { config: String, attempts: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("mask resolution failed for scene {scene}, node {node}, step {step}: {path} not found")]
    Resolution {
        scene: String,
        node: usize,
        step: u8,
        path: PathBuf,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            constraint,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
