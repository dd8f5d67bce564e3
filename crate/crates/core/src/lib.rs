//! Simulation, distributed mask-driven GEVD-SDW-MWF enhancement and
//! evaluation for ad-hoc microphone arrays.
//!
//! The numeric core (STFT, masks, covariances, GEVD, filters, pipeline) is
//! generic over [`scalar::Real`]; the aliases below fix it to `f64` or `f32`.
//! Room simulation and evaluation work in `f64` only.

pub mod beamformer;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod gevd;
pub mod io;
pub mod linalg;
pub mod mask;
pub mod pipeline;
pub mod room;
pub mod scalar;
pub mod scene;
pub mod signal;
pub mod spatial;
pub mod stft;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Real;

pub type TimeSignal64 = signal::TimeSignal<f64>;
pub type TimeSignal32 = signal::TimeSignal<f32>;
pub type Spectrogram64 = stft::Spectrogram<f64>;
pub type Spectrogram32 = stft::Spectrogram<f32>;
pub type TfMask64 = mask::TfMask<f64>;
pub type TfMask32 = mask::TfMask<f32>;
pub type CMatrix64 = linalg::CMatrix<f64>;
pub type CMatrix32 = linalg::CMatrix<f32>;
pub type Stft64 = stft::Stft<f64>;
pub type Stft32 = stft::Stft<f32>;
pub type PipelineOutput64 = pipeline::PipelineOutput<f64>;
pub type PipelineOutput32 = pipeline::PipelineOutput<f32>;
pub type SceneInput64 = pipeline::SceneInput<f64>;
pub type SceneInput32 = pipeline::SceneInput<f32>;
