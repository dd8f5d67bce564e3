use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sample rate of every pipeline-internal signal.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono waveform with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal<T = f64> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> TimeSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("time signal with no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Rate {
                found: 0,
                expected: SAMPLE_RATE,
            });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// A signal at the pipeline rate.
    pub fn at_pipeline_rate(samples: Vec<T>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|&x| x * x).sum()
    }

    pub fn rms(&self) -> T {
        (self.energy() / T::from_usize_lossy(self.len())).sqrt()
    }

    /// Truncates or zero-pads to exactly `len` samples.
    pub fn resized(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len.max(1), T::zero());
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub fn cast<U: Real>(&self) -> TimeSignal<U> {
        TimeSignal {
            samples: self
                .samples
                .iter()
                .map(|&x| U::lit(x.to_f64_lossy()))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}
