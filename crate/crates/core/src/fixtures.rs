//! Deterministic synthetic stand-ins for speech and speech-shaped noise,
//! used when no recorded corpus is available.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::signal::SAMPLE_RATE;

const FS: f64 = SAMPLE_RATE as f64;

/// Formant centre frequencies (Hz) of a few vowel-like sounds.
const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [530.0, 1840.0, 2480.0],
    [270.0, 2290.0, 3010.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
];

fn formant_gain(freq: f64, formants: &[f64; 3]) -> f64 {
    let bw = [90.0, 110.0, 170.0];
    let g: f64 = formants
        .iter()
        .zip(bw)
        .enumerate()
        .map(|(i, (&f, b))| {
            let x = (freq - f) / b;
            (1.0 / (1 + i) as f64) / (1.0 + x * x)
        })
        .sum();
    g / (1.0 + freq / 1000.0)
}

fn voiced(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let n = out.len();
    let f0_start: f64 = rng.random_range(90.0..230.0);
    let f0_end = (f0_start * rng.random_range(0.8..1.25f64)).clamp(90.0, 230.0);
    let a = VOWELS[rng.random_range(0..VOWELS.len())];
    let b = VOWELS[rng.random_range(0..VOWELS.len())];
    let n_harm = (4000.0 / f0_start.min(f0_end)) as usize;
    let mut phase = 0.0;
    for (t, o) in out.iter_mut().enumerate() {
        let x = t as f64 / n as f64;
        let f0 = f0_start + (f0_end - f0_start) * x;
        phase += 2.0 * PI * f0 / FS;
        let formants = [
            a[0] + (b[0] - a[0]) * x,
            a[1] + (b[1] - a[1]) * x,
            a[2] + (b[2] - a[2]) * x,
        ];
        let mut v = 0.0;
        for h in 1..=n_harm {
            let f = h as f64 * f0;
            if f >= 4000.0 {
                break;
            }
            v += formant_gain(f, &formants) * (h as f64 * phase).sin();
        }
        let env = (PI * x).sin().powf(0.6);
        *o += env * v;
    }
}

fn fricative(rng: &mut ChaCha8Rng, out: &mut [f64], gain: f64) {
    let n = out.len();
    let mut prev = 0.0;
    for (t, o) in out.iter_mut().enumerate() {
        let w: f64 = rng.sample(StandardNormal);
        let hp = w - prev;
        prev = w;
        let env = (PI * t as f64 / n as f64).sin();
        *o += gain * env * hp;
    }
}

/// Syllable trains with gliding harmonic excitation under moving formants,
/// separated by pauses and occasional fricative bursts.
pub fn synthetic_speech(n_samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; n_samples];
    let ms = |v: f64| (v * FS / 1000.0) as usize;
    let mut pos = ms(rng.random_range(20.0..150.0));
    while pos < n_samples {
        let n_syll = rng.random_range(2..7);
        for _ in 0..n_syll {
            if rng.random_bool(0.3) {
                let len = ms(rng.random_range(40.0..120.0)).min(n_samples.saturating_sub(pos));
                fricative(&mut rng, &mut out[pos..pos + len], 0.15);
                pos += len;
            }
            let len = ms(rng.random_range(120.0..300.0)).min(n_samples.saturating_sub(pos));
            voiced(&mut rng, &mut out[pos..pos + len]);
            pos += len + ms(rng.random_range(10.0..60.0));
            if pos >= n_samples {
                break;
            }
        }
        pos += ms(rng.random_range(150.0..500.0));
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n_samples.max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in &mut out {
            *v *= 0.05 / rms;
        }
    }
    out
}

/// Noise with the long-term magnitude spectrum of [`synthetic_speech`] and
/// random phase.
pub fn speech_shaped_noise(n_samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5353_4e00);
    let template = synthetic_speech(n_samples, seed.wrapping_add(1));
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_samples);
    let inv = planner.plan_fft_inverse(n_samples);
    let mut buf: Vec<Complex<f64>> = template.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let half = n_samples / 2;
    for k in 1..=half {
        let theta = rng.random_range(0.0..2.0 * PI);
        let mag = buf[k].norm();
        buf[k] = Complex::from_polar(mag, theta);
        if k != n_samples - k {
            buf[n_samples - k] = buf[k].conj();
        } else {
            buf[k] = Complex::new(mag, 0.0);
        }
    }
    buf[0] = Complex::new(0.0, 0.0);
    inv.process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n_samples.max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in &mut out {
            *v *= 0.05 / rms;
        }
    }
    out
}
