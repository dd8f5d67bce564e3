//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames use a periodic Hann window of 512 samples with a hop of 256 (32 ms
//! and 16 ms at 16 kHz). Frame `t` starts at sample `t·hop`; frames running
//! past the end of the signal are zero-padded.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::TimeSignal;

pub const FRAME_SIZE: usize = 512;
pub const HOP: usize = 256;
pub const N_BINS: usize = FRAME_SIZE / 2 + 1;
/// Lower clamp on the overlap-add normaliser, relative to its peak. The
/// interior of a 50 %-overlap Hann framing never drops below 0.5.
pub const NORM_FLOOR: f64 = 0.1;

/// One-sided complex spectrogram stored bin-major: entry `(f, t)` lives at
/// `f * n_frames + t`, so each frequency's frames are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram<T> {
    n_bins: usize,
    n_frames: usize,
    frame_size: usize,
    hop: usize,
    sample_rate: u32,
    bins: Vec<Complex<T>>,
}

impl<T: Real> Spectrogram<T> {
    pub fn zeros(n_frames: usize, frame_size: usize, hop: usize, sample_rate: u32) -> Self {
        let n_bins = frame_size / 2 + 1;
        Self {
            n_bins,
            n_frames,
            frame_size,
            hop,
            sample_rate,
            bins: vec![Complex::zero(); n_bins * n_frames],
        }
    }

    /// A pipeline-grid spectrogram from raw bin-major data.
    pub fn from_bins(n_frames: usize, bins: Vec<Complex<T>>) -> Result<Self> {
        if bins.len() != N_BINS * n_frames {
            return Err(Error::Size(format!(
                "{} values do not fill {N_BINS}x{n_frames}",
                bins.len()
            )));
        }
        Ok(Self {
            n_bins: N_BINS,
            n_frames,
            frame_size: FRAME_SIZE,
            hop: HOP,
            sample_rate: crate::signal::SAMPLE_RATE,
            bins,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.bins
    }

    /// All frames of frequency bin `f`.
    pub fn bin(&self, f: usize) -> &[Complex<T>] {
        &self.bins[f * self.n_frames..(f + 1) * self.n_frames]
    }

    pub fn bin_mut(&mut self, f: usize) -> &mut [Complex<T>] {
        let n = self.n_frames;
        &mut self.bins[f * n..(f + 1) * n]
    }

    #[inline]
    pub fn get(&self, f: usize, t: usize) -> Complex<T> {
        self.bins[f * self.n_frames + t]
    }

    /// True when both spectrograms share bins, frames and framing.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.n_bins == other.n_bins
            && self.n_frames == other.n_frames
            && self.frame_size == other.frame_size
            && self.hop == other.hop
    }

    pub fn energy(&self) -> T {
        self.bins.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Elementwise `a·self + b·other`.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::Size("spectrogram grids differ".into()));
        }
        let mut out = self.clone();
        for (o, x) in out.bins.iter_mut().zip(&other.bins) {
            *o = *o * a + x * b;
        }
        Ok(out)
    }
}

/// Periodic (DFT-even) Hann window.
pub fn hann_periodic<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let x = T::lit(2.0) * T::PI() * T::from_usize_lossy(i) / T::from_usize_lossy(n);
            T::lit(0.5) - T::lit(0.5) * x.cos()
        })
        .collect()
}

/// Reusable analysis/synthesis engine (window and FFT plans).
pub struct Stft<T: Real> {
    frame_size: usize,
    hop: usize,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Default for Stft<T> {
    fn default() -> Self {
        Self::new(FRAME_SIZE, HOP)
    }
}

impl<T: Real> Stft<T> {
    pub fn new(frame_size: usize, hop: usize) -> Self {
        assert!(frame_size >= 2 && frame_size % 2 == 0 && hop > 0 && hop <= frame_size);
        let mut planner = FftPlanner::new();
        Self {
            frame_size,
            hop,
            window: hann_periodic(frame_size),
            forward: planner.plan_fft_forward(frame_size),
            inverse: planner.plan_fft_inverse(frame_size),
        }
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn n_frames_for(&self, len: usize) -> usize {
        len.div_ceil(self.hop)
    }

    pub fn analyze(&self, signal: &TimeSignal<T>) -> Result<Spectrogram<T>> {
        let x = signal.samples();
        if x.len() < self.frame_size {
            return Err(Error::Size(format!(
                "signal of {} samples is shorter than one {}-sample frame",
                x.len(),
                self.frame_size
            )));
        }
        let n_frames = self.n_frames_for(x.len());
        let mut spec = Spectrogram::zeros(n_frames, self.frame_size, self.hop, signal.sample_rate());
        let mut buf = vec![Complex::zero(); self.frame_size];
        for t in 0..n_frames {
            let start = t * self.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                let v = x.get(start + i).copied().unwrap_or_else(T::zero);
                *b = Complex::new(v * self.window[i], T::zero());
            }
            self.forward.process(&mut buf);
            for f in 0..spec.n_bins {
                spec.bins[f * n_frames + t] = buf[f];
            }
        }
        Ok(spec)
    }

    /// Weighted overlap-add with the analysis window as synthesis window,
    /// normalised per sample by the accumulated squared window (clamped
    /// below at [`NORM_FLOOR`] of its peak). Output length
    /// is `(n_frames − 1)·hop + frame_size`; callers trim to their length.
    pub fn synthesize(&self, spec: &Spectrogram<T>) -> Result<TimeSignal<T>> {
        if spec.frame_size != self.frame_size
            || spec.hop != self.hop
            || spec.n_bins != self.frame_size / 2 + 1
            || spec.bins.len() != spec.n_bins * spec.n_frames
        {
            return Err(Error::Size("spectrogram framing does not match the transform".into()));
        }
        if spec.n_frames == 0 {
            return Err(Error::Empty("spectrogram has no frames".into()));
        }
        let n = self.frame_size;
        let out_len = (spec.n_frames - 1) * self.hop + n;
        let mut out = vec![T::zero(); out_len];
        let mut norm = vec![T::zero(); out_len];
        let mut buf = vec![Complex::zero(); n];
        let scale = T::one() / T::from_usize_lossy(n);
        for t in 0..spec.n_frames {
            for f in 0..spec.n_bins {
                buf[f] = spec.get(f, t);
            }
            // Hermitian extension; DC and Nyquist imaginary parts are dropped.
            buf[0].im = T::zero();
            buf[n / 2].im = T::zero();
            for f in 1..n / 2 {
                buf[n - f] = buf[f].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for i in 0..n {
                let w = self.window[i];
                out[start + i] += buf[i].re * scale * w;
                norm[start + i] += w * w;
            }
        }
        // Near the signal edges the squared-window sum approaches zero; the
        // clamp keeps modified spectra from being amplified there.
        let peak = norm.iter().copied().fold(T::zero(), T::max);
        let floor = peak * T::lit(NORM_FLOOR);
        for (o, &d) in out.iter_mut().zip(&norm) {
            *o /= d.max(floor);
        }
        TimeSignal::new(out, spec.sample_rate)
    }

    /// Synthesis trimmed (or padded) to `len` samples.
    pub fn synthesize_len(&self, spec: &Spectrogram<T>, len: usize) -> Result<TimeSignal<T>> {
        Ok(self.synthesize(spec)?.resized(len))
    }
}

/// Analysis with the pipeline framing.
pub fn analyze<T: Real>(signal: &TimeSignal<T>) -> Result<Spectrogram<T>> {
    Stft::default().analyze(signal)
}

/// Synthesis with the pipeline framing.
pub fn synthesize<T: Real>(spec: &Spectrogram<T>) -> Result<TimeSignal<T>> {
    Stft::default().synthesize(spec)
}
