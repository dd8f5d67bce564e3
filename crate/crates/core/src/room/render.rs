use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::FftConvolver;
use crate::error::{Error, Result};
use crate::scene::{distance, SceneDescriptor, N_NODES};
use crate::signal::{TimeSignal, SAMPLE_RATE};

use super::rir::{
    max_delay_samples, reflection_order_for, rir_length_for_delay, sabine_absorption, simulate_rir,
    SPEED_OF_SOUND,
};

/// Both source signals are scaled to this RMS before the noise gain applies.
pub const SOURCE_RMS: f64 = 0.05;
/// Mixed into the scene seed to derive the noise-offset stream.
const NOISE_OFFSET_SALT: u64 = 0x6e6f_6973_655f_6f66;

/// A descriptor with its derived acoustic parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub descriptor: SceneDescriptor,
    pub absorption: f64,
    pub max_reflection_order: usize,
    pub speed_of_sound: f64,
}

impl Scene {
    /// Derives absorption and reflection order. `order_cap` lowers the order
    /// ceiling (useful for fast test corpora).
    pub fn new(descriptor: SceneDescriptor, order_cap: Option<usize>) -> Result<Self> {
        let absorption = sabine_absorption(descriptor.rt60, &descriptor.room_dims)?;
        let mut order = reflection_order_for(&descriptor.room_dims, absorption);
        if let Some(cap) = order_cap {
            order = order.min(cap);
        }
        Ok(Self {
            descriptor,
            absorption,
            max_reflection_order: order,
            speed_of_sound: SPEED_OF_SOUND,
        })
    }

    /// Direct-path delay from `source` to the reference mic of `node`, samples.
    pub fn direct_delay(&self, node: usize, target: bool) -> f64 {
        let d = &self.descriptor;
        let src = if target { d.target() } else { d.noise() };
        distance(src, d.reference_mic(node)) / self.speed_of_sound * f64::from(SAMPLE_RATE)
    }
}

/// Per-microphone images and mixtures. Indexing is `[node][mic]`.
#[derive(Clone, Debug)]
pub struct RenderedScene {
    pub speech_images: Vec<Vec<TimeSignal>>,
    pub noise_images: Vec<Vec<TimeSignal>>,
    pub mixtures: Vec<Vec<TimeSignal>>,
    /// Input SIR at each node's reference mic, dB.
    pub input_sir_db: Vec<f64>,
    /// Source signals as emitted: normalized speech and gained noise.
    pub dry_target: TimeSignal,
    pub dry_noise: TimeSignal,
}

impl RenderedScene {
    pub fn n_samples(&self) -> usize {
        self.mixtures[0][0].len()
    }
}

fn scaled_to_rms(x: &[f64], rms: f64) -> Vec<f64> {
    let current = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    x.iter().map(|v| v * rms / current).collect()
}

/// Noise segment of `len` samples starting at a seed-determined offset,
/// wrapping around when the recording is shorter.
pub fn noise_segment(noise: &[f64], len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_OFFSET_SALT);
    let offset = rng.random_range(0..noise.len());
    (0..len).map(|i| noise[(offset + i) % noise.len()]).collect()
}

fn sir_db(s: &[f64], n: &[f64]) -> f64 {
    let es: f64 = s.iter().map(|x| x * x).sum();
    let en: f64 = n.iter().map(|x| x * x).sum();
    10.0 * (es / en).log10()
}

fn check_rate(sig: &TimeSignal) -> Result<()> {
    if sig.sample_rate() != SAMPLE_RATE {
        return Err(Error::Rate {
            found: sig.sample_rate(),
            expected: SAMPLE_RATE,
        });
    }
    Ok(())
}

/// Convolves speech and gained noise with every microphone's RIRs. All
/// outputs have `len(speech) + rir_len − 1` samples.
pub fn render_scene(scene: &Scene, speech: &TimeSignal, noise: &TimeSignal) -> Result<RenderedScene> {
    check_rate(speech)?;
    check_rate(noise)?;
    if speech.energy() == 0.0 {
        return Err(Error::DegenerateInput("speech signal is silent".into()));
    }
    if noise.energy() == 0.0 {
        return Err(Error::DegenerateInput("noise signal is silent".into()));
    }
    let d = &scene.descriptor;
    let fs = f64::from(SAMPLE_RATE);
    let order = scene.max_reflection_order;

    let dry_target = scaled_to_rms(speech.samples(), SOURCE_RMS);
    let segment = noise_segment(noise.samples(), speech.len(), d.rng_seed);
    let gain = 10f64.powf(d.noise_gain_db / 20.0);
    let dry_noise: Vec<f64> = scaled_to_rms(&segment, SOURCE_RMS).iter().map(|x| x * gain).collect();

    let max_delay = d
        .mic_positions
        .iter()
        .flatten()
        .flat_map(|mic| {
            [d.target(), d.noise()]
                .map(|src| max_delay_samples(&d.room_dims, src, mic, order, fs))
        })
        .fold(0.0, f64::max);
    let rir_len = rir_length_for_delay(max_delay);
    let out_len = speech.len() + rir_len - 1;
    let target_conv = FftConvolver::new(&dry_target, rir_len);
    let noise_conv = FftConvolver::new(&dry_noise, rir_len);

    let mut speech_images = Vec::with_capacity(N_NODES);
    let mut noise_images = Vec::with_capacity(N_NODES);
    let mut mixtures = Vec::with_capacity(N_NODES);
    let mut input_sir_db = Vec::with_capacity(N_NODES);
    for mics in &d.mic_positions {
        let mut s_node = Vec::with_capacity(mics.len());
        let mut n_node = Vec::with_capacity(mics.len());
        let mut y_node = Vec::with_capacity(mics.len());
        for mic in mics {
            let h_s = simulate_rir(&d.room_dims, d.target(), mic, order, scene.absorption, fs, Some(rir_len))?;
            let h_n = simulate_rir(&d.room_dims, d.noise(), mic, order, scene.absorption, fs, Some(rir_len))?;
            let s = target_conv.convolve(&h_s, out_len);
            let n = noise_conv.convolve(&h_n, out_len);
            let y: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + b).collect();
            s_node.push(TimeSignal::at_pipeline_rate(s)?);
            n_node.push(TimeSignal::at_pipeline_rate(n)?);
            y_node.push(TimeSignal::at_pipeline_rate(y)?);
        }
        input_sir_db.push(sir_db(s_node[0].samples(), n_node[0].samples()));
        speech_images.push(s_node);
        noise_images.push(n_node);
        mixtures.push(y_node);
    }
    Ok(RenderedScene {
        speech_images,
        noise_images,
        mixtures,
        input_sir_db,
        dry_target: TimeSignal::at_pipeline_rate(dry_target)?,
        dry_noise: TimeSignal::at_pipeline_rate(dry_noise)?,
    })
}
