//! Shoebox image-source room impulse responses.

use crate::error::{Error, Result};
use crate::scene::Point3;

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Length of the windowed-sinc fractional-delay kernel.
pub const KERNEL_TAPS: usize = 81;
const KERNEL_HALF: isize = (KERNEL_TAPS / 2) as isize;
/// Reflection order never exceeds this, whatever the absorption.
pub const MAX_ORDER_CAP: usize = 12;
/// Tail-energy fraction below which a reflection order is considered sufficient.
pub const TAIL_ENERGY_FRACTION: f64 = 1e-3;

/// Uniform wall absorption from Sabine's formula `α = 0.161·V / (S·RT60)`.
pub fn sabine_absorption(rt60: f64, dims: &Point3) -> Result<f64> {
    if !(rt60 > 0.0) || dims.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Geometry(format!(
            "sabine needs rt60 > 0 and positive dims (rt60 {rt60}, dims {dims:?})"
        )));
    }
    let [l, w, h] = *dims;
    let volume = l * w * h;
    let surface = 2.0 * (l * w + l * h + w * h);
    let alpha = 0.161 * volume / (surface * rt60);
    if alpha > 1.0 {
        return Err(Error::Infeasible { alpha, rt60 });
    }
    Ok(alpha)
}

/// Pressure reflection coefficient `β = √(1 − α)`.
pub fn reflection_coefficient(absorption: f64) -> f64 {
    (1.0 - absorption).max(0.0).sqrt()
}

/// Smallest order whose estimated tail energy is below 0.1 % of the total,
/// capped at [`MAX_ORDER_CAP`].
///
/// Shell `r` holds `4r² + 2` images at roughly `r·L̄` meters (L̄ the mean room
/// dimension) each with energy `β^{2r}/(r·L̄)²`; the direct path is taken at
/// `L̄/2`.
pub fn reflection_order_for(dims: &Point3, absorption: f64) -> usize {
    let beta2 = 1.0 - absorption;
    let mean_dim = dims.iter().sum::<f64>() / 3.0;
    let shell = |r: usize| -> f64 {
        if r == 0 {
            4.0 / (mean_dim * mean_dim)
        } else {
            let rf = r as f64;
            (4.0 * rf * rf + 2.0) * beta2.powi(r as i32) / (rf * mean_dim).powi(2)
        }
    };
    let energies: Vec<f64> = (0..400).map(shell).collect();
    let total: f64 = energies.iter().sum();
    let mut tail = total;
    for (order, e) in energies.iter().enumerate() {
        tail -= e;
        if order >= MAX_ORDER_CAP || tail < TAIL_ENERGY_FRACTION * total {
            return order.min(MAX_ORDER_CAP);
        }
    }
    MAX_ORDER_CAP
}

/// One mirrored copy of the source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageSource {
    pub position: Point3,
    pub reflections: u32,
}

fn mirror(index: i32, extent: f64, coord: f64) -> f64 {
    if index % 2 == 0 {
        f64::from(index) * extent + coord
    } else {
        f64::from(index + 1) * extent - coord
    }
}

/// All images with at most `order` wall reflections.
pub fn image_sources(dims: &Point3, source: &Point3, order: usize) -> Vec<ImageSource> {
    let n = order as i32;
    let mut out = Vec::new();
    for i in -n..=n {
        let ri = i.abs();
        for j in -(n - ri)..=(n - ri) {
            let rj = j.abs();
            for k in -(n - ri - rj)..=(n - ri - rj) {
                out.push(ImageSource {
                    position: [
                        mirror(i, dims[0], source[0]),
                        mirror(j, dims[1], source[1]),
                        mirror(k, dims[2], source[2]),
                    ],
                    reflections: (ri + rj + k.abs()) as u32,
                });
            }
        }
    }
    out
}

fn check_inside(dims: &Point3, p: &Point3, what: &str) -> Result<()> {
    if crate::scene::inside_room(dims, p) {
        Ok(())
    } else {
        Err(Error::Geometry(format!("{what} at {p:?} is not strictly inside room {dims:?}")))
    }
}

/// Delay of the farthest image, in samples.
pub fn max_delay_samples(dims: &Point3, source: &Point3, mic: &Point3, order: usize, fs: f64) -> f64 {
    image_sources(dims, source, order)
        .iter()
        .map(|img| crate::scene::distance(&img.position, mic))
        .fold(0.0, f64::max)
        / SPEED_OF_SOUND
        * fs
}

/// RIR length that holds every image pulse including its kernel tail.
pub fn rir_length_for_delay(max_delay: f64) -> usize {
    max_delay.floor() as usize + KERNEL_HALF as usize + 1
}

/// Adds a Hann-windowed sinc pulse of amplitude `amp` centered at fractional
/// sample `delay`. Taps before sample 0 or past the end are dropped.
fn add_pulse(rir: &mut [f64], delay: f64, amp: f64) {
    let base = delay.floor();
    let frac = delay - base;
    let base = base as isize;
    // sin(π(k − f)) = −(−1)^k · sin(πf) for integer k.
    let sin_pf = (std::f64::consts::PI * frac).sin();
    let span = (KERNEL_HALF + 1) as f64;
    for k in -KERNEL_HALF..=KERNEL_HALF {
        let idx = base + k;
        if idx < 0 || idx as usize >= rir.len() {
            continue;
        }
        let x = k as f64 - frac;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            sign * sin_pf / (std::f64::consts::PI * x)
        };
        let window = 0.5 * (1.0 + (std::f64::consts::PI * x / span).cos());
        rir[idx as usize] += amp * window * sinc;
    }
}

/// Image-source RIR between `source` and `mic` with reflection orders up to
/// `order`. Each image contributes `β^r / d` at delay `d / c`.
///
/// `len` fixes the output length; `None` sizes it to hold the farthest image.
pub fn simulate_rir(
    dims: &Point3,
    source: &Point3,
    mic: &Point3,
    order: usize,
    absorption: f64,
    fs: f64,
    len: Option<usize>,
) -> Result<Vec<f64>> {
    check_inside(dims, source, "source")?;
    check_inside(dims, mic, "microphone")?;
    if !(0.0..=1.0).contains(&absorption) {
        return Err(Error::Geometry(format!("absorption {absorption} outside [0, 1]")));
    }
    let images = image_sources(dims, source, order);
    let beta = reflection_coefficient(absorption);
    let len = len.unwrap_or_else(|| {
        rir_length_for_delay(max_delay_samples(dims, source, mic, order, fs))
    });
    let mut rir = vec![0.0; len];
    for img in &images {
        let d = crate::scene::distance(&img.position, mic);
        if d < 1e-6 {
            return Err(Error::Geometry("source and microphone coincide".into()));
        }
        let amp = beta.powi(img.reflections as i32) / d;
        add_pulse(&mut rir, d / SPEED_OF_SOUND * fs, amp);
    }
    Ok(rir)
}
