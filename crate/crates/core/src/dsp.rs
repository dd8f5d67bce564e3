//! FFT helpers shared by the room renderer and the metrics.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Linear convolution of one fixed signal against many short filters.
pub struct FftConvolver {
    fft_len: usize,
    signal_len: usize,
    signal_fft: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftConvolver {
    /// Prepares convolution of `signal` with filters of up to `max_filter_len` taps.
    pub fn new(signal: &[f64], max_filter_len: usize) -> Self {
        let fft_len = (signal.len() + max_filter_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut signal_fft = to_complex_padded(signal, fft_len);
        forward.process(&mut signal_fft);
        Self {
            fft_len,
            signal_len: signal.len(),
            signal_fft,
            forward,
            inverse,
        }
    }

    /// Full linear convolution, truncated to `out_len` samples.
    pub fn convolve(&self, filter: &[f64], out_len: usize) -> Vec<f64> {
        assert!(self.signal_len + filter.len() <= self.fft_len, "filter longer than planned");
        let mut buf = to_complex_padded(filter, self.fft_len);
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.signal_fft) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        let full = self.signal_len + filter.len() - 1;
        (0..out_len)
            .map(|i| if i < full { buf[i].re * scale } else { 0.0 })
            .collect()
    }
}

fn to_complex_padded(x: &[f64], len: usize) -> Vec<Complex<f64>> {
    let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
    v.resize(len, Complex::new(0.0, 0.0));
    v
}

/// Cross-correlation `c[τ] = Σ_m a[m]·b[m + τ]` for `τ ∈ [−max_lag, max_lag]`,
/// returned with index `τ + max_lag`.
pub fn cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let fft_len = (a.len() + b.len() + 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);
    let mut fa = to_complex_padded(a, fft_len);
    let mut fb = to_complex_padded(b, fft_len);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / fft_len as f64;
    (0..=2 * max_lag)
        .map(|i| {
            let lag = i as isize - max_lag as isize;
            let idx = lag.rem_euclid(fft_len as isize) as usize;
            fa[idx].re * scale
        })
        .collect()
}
