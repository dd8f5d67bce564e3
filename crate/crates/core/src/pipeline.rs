//! The two-step distributed enhancement scheme: local compression, a fully
//! connected exchange of compressed signals, and a joint second filter.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::beamformer::{apply_weights, gevd_sdw_filter, BeamformerWeights};
use crate::error::{Error, Result};
use crate::mask::{MaskProvider, NodeReference, Step, TfMask};
use crate::scalar::Real;
use crate::signal::TimeSignal;
use crate::spatial::{masked_covariances, ChannelOrigin, MaskPolicy, SignalKind, StackedSpectra};
use crate::stft::{Spectrogram, Stft};

/// Which step-1 estimates each node broadcasts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressedType {
    #[default]
    Target,
    Noise,
    Both,
}

impl CompressedType {
    pub fn kinds(self) -> &'static [SignalKind] {
        match self {
            CompressedType::Target => &[SignalKind::Target],
            CompressedType::Noise => &[SignalKind::Noise],
            CompressedType::Both => &[SignalKind::Target, SignalKind::Noise],
        }
    }
}

/// How a node forms its noise estimate `z_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseEstimate {
    /// SDW-MWF on the pencil with speech and noise roles exchanged.
    #[default]
    Filter,
    /// Reference channel minus the speech estimate.
    Residual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mask_policy: MaskPolicy,
    pub compressed: CompressedType,
    pub mu: f64,
    #[serde(default)]
    pub noise_estimate: NoiseEstimate,
    pub step1_masks: MaskProvider,
    pub step2_masks: MaskProvider,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mask_policy: MaskPolicy::Local,
            compressed: CompressedType::Target,
            mu: 1.0,
            noise_estimate: NoiseEstimate::Filter,
            step1_masks: MaskProvider::default(),
            step2_masks: MaskProvider::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be finite and non-negative, got {}", self.mu)));
        }
        Ok(())
    }

    /// Step-2 channel count for a node with `local_channels` microphones in a
    /// network of `n_nodes`.
    pub fn step2_channels(&self, local_channels: usize, n_nodes: usize) -> usize {
        local_channels + n_nodes.saturating_sub(1) * self.compressed.kinds().len()
    }
}

/// Result of the local filtering step at one node.
#[derive(Clone, Debug)]
pub struct Step1Output<T> {
    pub z_s: Spectrogram<T>,
    pub z_n: Spectrogram<T>,
    pub w_kk: BeamformerWeights<T>,
    /// Noise-estimating filter, absent in residual mode.
    pub v_kk: Option<BeamformerWeights<T>>,
    pub degenerate_noise_bins: usize,
}

impl<T: Real> Step1Output<T> {
    pub fn signal(&self, kind: SignalKind) -> &Spectrogram<T> {
        match kind {
            SignalKind::Target => &self.z_s,
            SignalKind::Noise => &self.z_n,
        }
    }
}

/// Local GEVD-SDW-MWF: `z_s = w_kkᴴ y_k`, plus the noise estimate `z_n`.
pub fn step1_compress<T: Real>(
    local: &StackedSpectra<T>,
    mask: &TfMask<T>,
    mu: T,
    noise_estimate: NoiseEstimate,
) -> Result<Step1Output<T>> {
    let cov = masked_covariances(local, mask, MaskPolicy::Local)?;
    let w_kk = gevd_sdw_filter(&cov, mu)?;
    let z_s = apply_weights(&w_kk, local)?;
    let (z_n, v_kk) = match noise_estimate {
        NoiseEstimate::Filter => {
            let v = gevd_sdw_filter(&cov.swapped(), mu)?;
            (apply_weights(&v, local)?, Some(v))
        }
        NoiseEstimate::Residual => (local.reference().axpby(T::one(), &z_s, -T::one())?, None),
    };
    Ok(Step1Output {
        z_s,
        z_n,
        w_kk,
        v_kk,
        degenerate_noise_bins: cov.degenerate_noise_bins.len(),
    })
}

/// One compressed signal as delivered to a receiver.
#[derive(Clone, Debug)]
pub struct Transmission<T> {
    pub sender: usize,
    pub kind: SignalKind,
    pub signal: Spectrogram<T>,
    /// The sender's step-1 mask, present under the distant policy.
    pub mask: Option<TfMask<T>>,
}

/// Per-node state across both steps.
#[derive(Clone, Debug)]
pub struct NodeBundle<T> {
    pub node: usize,
    pub local: StackedSpectra<T>,
    pub step1_mask: TfMask<T>,
    pub step1: Step1Output<T>,
    pub received: Vec<Transmission<T>>,
}

/// Byte accounting of one exchange round. Signals are counted as complex
/// single-precision values, masks as single-precision values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeStats {
    pub links: usize,
    pub signals: usize,
    pub signal_bytes: u64,
    pub masks: usize,
    pub mask_bytes: u64,
}

/// Bytes of one transmitted mask over a `n_bins × n_frames` grid.
pub fn mask_bytes(n_bins: usize, n_frames: usize) -> u64 {
    (n_bins * n_frames * 4) as u64
}

/// Bytes of one transmitted compressed signal.
pub fn signal_bytes(n_bins: usize, n_frames: usize) -> u64 {
    (n_bins * n_frames * 8) as u64
}

/// Fully connected broadcast. Each receiver gets, for every other node in
/// ascending order, the configured compressed signals (target before noise).
/// Under the distant policy the sender's mask travels once per link.
pub fn exchange<T: Real>(
    bundles: &mut [NodeBundle<T>],
    compressed: CompressedType,
    policy: MaskPolicy,
) -> Result<ExchangeStats> {
    for (k, b) in bundles.iter().enumerate() {
        if b.node != k {
            return Err(Error::Protocol(format!(
                "bundle for node {} missing (found node {} in its place)",
                k + 1,
                b.node + 1
            )));
        }
    }
    let mut stats = ExchangeStats::default();
    let outgoing: Vec<(Vec<(SignalKind, Spectrogram<T>)>, TfMask<T>)> = bundles
        .iter()
        .map(|b| {
            let signals = compressed
                .kinds()
                .iter()
                .map(|&kind| (kind, b.step1.signal(kind).clone()))
                .collect();
            (signals, b.step1_mask.clone())
        })
        .collect();
    for receiver in bundles.iter_mut() {
        receiver.received.clear();
        for (sender, (signals, mask)) in outgoing.iter().enumerate() {
            if sender == receiver.node {
                continue;
            }
            stats.links += 1;
            let sent_mask = match policy {
                MaskPolicy::Local => None,
                MaskPolicy::Distant => {
                    stats.masks += 1;
                    stats.mask_bytes += mask_bytes(mask.n_bins(), mask.n_frames());
                    Some(mask.clone())
                }
            };
            for (kind, signal) in signals {
                stats.signals += 1;
                stats.signal_bytes += signal_bytes(signal.n_bins(), signal.n_frames());
                receiver.received.push(Transmission {
                    sender,
                    kind: *kind,
                    signal: signal.clone(),
                    mask: sent_mask.clone(),
                });
            }
        }
    }
    Ok(stats)
}

#[derive(Clone, Debug)]
pub struct Step2Output<T> {
    pub estimate: Spectrogram<T>,
    pub weights: BeamformerWeights<T>,
    pub origins: Vec<ChannelOrigin>,
    pub degenerate_noise_bins: usize,
}

/// Joint filter over `ỹ_k = [y_k; z₋ₖ]`: `ŝ_k = w_kᴴ ỹ_k`.
pub fn step2_enhance<T: Real>(
    bundle: &NodeBundle<T>,
    mask: &TfMask<T>,
    policy: MaskPolicy,
    mu: T,
) -> Result<Step2Output<T>> {
    let mut stacked = bundle.local.clone();
    for tx in &bundle.received {
        stacked.push_received(tx.sender, tx.kind, tx.signal.clone(), tx.mask.clone())?;
    }
    let cov = masked_covariances(&stacked, mask, policy)?;
    let weights = gevd_sdw_filter(&cov, mu)?;
    Ok(Step2Output {
        estimate: apply_weights(&weights, &stacked)?,
        weights,
        origins: stacked.origins().to_vec(),
        degenerate_noise_bins: cov.degenerate_noise_bins.len(),
    })
}

/// What the pipeline needs from a scene: the mixtures at every mic and,
/// for oracle masks, the clean images at each node's reference mic.
#[derive(Clone, Debug)]
pub struct SceneInput<T> {
    pub scene_id: String,
    /// `[node][mic]`, mic 0 is the reference.
    pub mixtures: Vec<Vec<TimeSignal<T>>>,
    pub speech_refs: Option<Vec<TimeSignal<T>>>,
    pub noise_refs: Option<Vec<TimeSignal<T>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeManifest {
    /// Counted from 1.
    pub node: usize,
    pub step1_channels: usize,
    pub step2_channels: usize,
    pub step2_channel_order: Vec<ChannelOrigin>,
    pub degenerate_noise_bins: [usize; 2],
    pub input_sir_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub analysis_ms: f64,
    pub step1_ms: f64,
    pub step2_ms: f64,
    pub synthesis_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene_id: String,
    pub config: PipelineConfig,
    pub step1_masks: String,
    pub step2_masks: String,
    pub n_frames: usize,
    pub n_bins: usize,
    pub nodes: Vec<NodeManifest>,
    pub exchange: ExchangeStats,
    pub timing: Timing,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput<T> {
    /// Step-1 output (`z_s`) per node, at the mixture length.
    pub step1: Vec<TimeSignal<T>>,
    pub step2: Vec<TimeSignal<T>>,
    pub manifest: SceneManifest,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn sir_db<T: Real>(s: &TimeSignal<T>, n: &TimeSignal<T>) -> f64 {
    10.0 * (s.energy().to_f64_lossy() / n.energy().to_f64_lossy()).log10()
}

/// analysis → step 1 → exchange → step 2 → synthesis for every node.
pub fn run_pipeline<T: Real>(input: &SceneInput<T>, config: &PipelineConfig) -> Result<PipelineOutput<T>> {
    config.validate()?;
    let n_nodes = input.mixtures.len();
    if n_nodes == 0 {
        return Err(Error::Empty(format!("scene {} has no nodes", input.scene_id)));
    }
    let len = input.mixtures[0].first().map(TimeSignal::len).unwrap_or(0);
    for (k, mics) in input.mixtures.iter().enumerate() {
        if mics.is_empty() || mics.iter().any(|m| m.len() != len) {
            return Err(Error::Size(format!(
                "node {} channels are missing or differ in length from {len}",
                k + 1
            )));
        }
    }
    for refs in [&input.speech_refs, &input.noise_refs].into_iter().flatten() {
        if refs.len() != n_nodes {
            return Err(Error::Size(format!("{} reference images for {n_nodes} nodes", refs.len())));
        }
    }
    let mu = T::lit(config.mu);
    let stft = Stft::<T>::default();

    let t0 = Instant::now();
    let mut locals = Vec::with_capacity(n_nodes);
    for mics in &input.mixtures {
        let specs = mics.iter().map(|m| stft.analyze(m)).collect::<Result<Vec<_>>>()?;
        locals.push(StackedSpectra::local(specs)?);
    }
    let analyze_refs = |refs: &Option<Vec<TimeSignal<T>>>| -> Result<Option<Vec<Spectrogram<T>>>> {
        refs.as_ref()
            .map(|v| v.iter().map(|s| stft.analyze(s)).collect::<Result<Vec<_>>>())
            .transpose()
    };
    let speech_specs = analyze_refs(&input.speech_refs)?;
    let noise_specs = analyze_refs(&input.noise_refs)?;
    let reference = |k: usize| NodeReference {
        mixture: locals[k].reference(),
        speech: speech_specs.as_ref().map(|v| &v[k]),
        noise: noise_specs.as_ref().map(|v| &v[k]),
    };
    let step1_masks = (0..n_nodes)
        .map(|k| config.step1_masks.get_mask(&input.scene_id, k, Step::One, reference(k)))
        .collect::<Result<Vec<_>>>()?;
    let step2_masks = (0..n_nodes)
        .map(|k| config.step2_masks.get_mask(&input.scene_id, k, Step::Two, reference(k)))
        .collect::<Result<Vec<_>>>()?;
    let analysis_ms = ms_since(t0);

    let t1 = Instant::now();
    let mut bundles = Vec::with_capacity(n_nodes);
    for (node, (local, mask)) in locals.into_iter().zip(step1_masks).enumerate() {
        let step1 = step1_compress(&local, &mask, mu, config.noise_estimate)?;
        bundles.push(NodeBundle {
            node,
            local,
            step1_mask: mask,
            step1,
            received: Vec::new(),
        });
    }
    let step1_ms = ms_since(t1);

    let t2 = Instant::now();
    let stats = exchange(&mut bundles, config.compressed, config.mask_policy)?;
    let step2 = bundles
        .iter()
        .zip(&step2_masks)
        .map(|(b, m)| step2_enhance(b, m, config.mask_policy, mu))
        .collect::<Result<Vec<_>>>()?;
    let step2_ms = ms_since(t2);

    let t3 = Instant::now();
    let step1_out = bundles
        .iter()
        .map(|b| stft.synthesize_len(&b.step1.z_s, len))
        .collect::<Result<Vec<_>>>()?;
    let step2_out = step2
        .iter()
        .map(|o| stft.synthesize_len(&o.estimate, len))
        .collect::<Result<Vec<_>>>()?;
    let synthesis_ms = ms_since(t3);

    let nodes = bundles
        .iter()
        .zip(&step2)
        .map(|(b, o)| NodeManifest {
            node: b.node + 1,
            step1_channels: b.local.n_channels(),
            step2_channels: o.origins.len(),
            step2_channel_order: o.origins.clone(),
            degenerate_noise_bins: [b.step1.degenerate_noise_bins, o.degenerate_noise_bins],
            input_sir_db: match (&input.speech_refs, &input.noise_refs) {
                (Some(s), Some(n)) => Some(sir_db(&s[b.node], &n[b.node])),
                _ => None,
            },
        })
        .collect();
    let first = bundles[0].local.reference();
    Ok(PipelineOutput {
        step1: step1_out,
        step2: step2_out,
        manifest: SceneManifest {
            scene_id: input.scene_id.clone(),
            config: config.clone(),
            step1_masks: config.step1_masks.describe(),
            step2_masks: config.step2_masks.describe(),
            n_frames: first.n_frames(),
            n_bins: first.n_bins(),
            nodes,
            exchange: stats,
            timing: Timing {
                analysis_ms,
                step1_ms,
                step2_ms,
                synthesis_ms,
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::random_complex;
    use crate::mask::irm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng, n_bins: usize, n_frames: usize) -> Spectrogram<f64> {
        let mut s = Spectrogram::zeros(n_frames, 2 * (n_bins - 1), 1, 16000);
        for z in s.as_mut_slice() {
            *z = random_complex(rng);
        }
        s
    }

    fn random_mask(rng: &mut ChaCha8Rng, n_bins: usize, n_frames: usize) -> TfMask<f64> {
        TfMask::from_values(n_bins, n_frames, (0..n_bins * n_frames).map(|_| rng.random()).collect()).unwrap()
    }

    fn node(rng: &mut ChaCha8Rng, k: usize, channels: usize) -> NodeBundle<f64> {
        let local = StackedSpectra::local((0..channels).map(|_| random_spec(rng, 6, 30)).collect()).unwrap();
        let mask = random_mask(rng, 6, 30);
        let step1 = step1_compress(&local, &mask, 1.0, NoiseEstimate::Filter).unwrap();
        NodeBundle {
            node: k,
            local,
            step1_mask: mask,
            step1,
            received: Vec::new(),
        }
    }

    #[test]
    fn single_channel_is_scalar_wiener() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = random_spec(&mut rng, 5, 40);
        let mask = random_mask(&mut rng, 5, 40);
        let local = StackedSpectra::local(vec![spec.clone()]).unwrap();
        let mu = 1.5;
        let out = step1_compress(&local, &mask, mu, NoiseEstimate::Filter).unwrap();
        for f in 0..5 {
            let ps: f64 = spec.bin(f).iter().zip(mask.bin(f)).map(|(y, m)| (y * m).norm_sqr()).sum::<f64>() / 40.0;
            let pn: f64 = spec.bin(f).iter().zip(mask.complement_bin(f)).map(|(y, m)| (y * m).norm_sqr()).sum::<f64>() / 40.0;
            let (ps, pn) = (ps * (1.0 + 1e-9), pn * (1.0 + 1e-9));
            let g = ps / (ps + mu * pn);
            for t in 0..40 {
                assert!((out.z_s.get(f, t) - spec.get(f, t) * g).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn swapping_masks_swaps_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let local = StackedSpectra::local((0..4).map(|_| random_spec(&mut rng, 6, 25)).collect()).unwrap();
        let mask = random_mask(&mut rng, 6, 25);
        let a = step1_compress(&local, &mask, 1.0, NoiseEstimate::Filter).unwrap();
        let b = step1_compress(&local, &mask.complement(), 1.0, NoiseEstimate::Filter).unwrap();
        assert_eq!(a.z_s, b.z_n);
        assert_eq!(a.z_n, b.z_s);
    }

    #[test]
    fn residual_noise_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let local = StackedSpectra::local((0..2).map(|_| random_spec(&mut rng, 4, 20)).collect()).unwrap();
        let out = step1_compress(&local, &random_mask(&mut rng, 4, 20), 1.0, NoiseEstimate::Residual).unwrap();
        let sum = out.z_s.axpby(1.0, &out.z_n, 1.0).unwrap();
        assert!(sum.axpby(1.0, local.reference(), -1.0).unwrap().energy() < 1e-24);
        assert!(out.v_kk.is_none());
    }

    #[test]
    fn exchange_ordering_and_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut bundles: Vec<_> = (0..4).map(|k| node(&mut rng, k, 2)).collect();
        let stats = exchange(&mut bundles, CompressedType::Both, MaskPolicy::Local).unwrap();
        for b in &bundles {
            assert_eq!(b.received.len(), 6);
        }
        let order: Vec<(usize, SignalKind)> = bundles[2].received.iter().map(|t| (t.sender, t.kind)).collect();
        use SignalKind::*;
        assert_eq!(order, vec![(0, Target), (0, Noise), (1, Target), (1, Noise), (3, Target), (3, Noise)]);
        assert_eq!(stats.mask_bytes, 0);
        assert_eq!(stats.links, 12);
        assert_eq!(stats.signal_bytes, 24 * signal_bytes(6, 30));

        let stats = exchange(&mut bundles, CompressedType::Target, MaskPolicy::Distant).unwrap();
        assert_eq!(stats.mask_bytes, 4 * 3 * mask_bytes(6, 30));
        let senders: Vec<usize> = bundles[2].received.iter().map(|t| t.sender).collect();
        assert_eq!(senders, vec![0, 1, 3]);
        assert!(bundles[2].received.iter().all(|t| t.mask.is_some()));
    }

    #[test]
    fn exchange_detects_missing_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bundles = vec![node(&mut rng, 0, 2), node(&mut rng, 2, 2)];
        match exchange(&mut bundles, CompressedType::Target, MaskPolicy::Local) {
            Err(Error::Protocol(msg)) => assert!(msg.contains("node 2")),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn single_node_step2_equals_step1() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut bundles = vec![node(&mut rng, 0, 4)];
        let stats = exchange(&mut bundles, CompressedType::Both, MaskPolicy::Local).unwrap();
        assert_eq!(stats, ExchangeStats::default());
        let b = &bundles[0];
        let out = step2_enhance(b, &b.step1_mask, MaskPolicy::Local, 1.0).unwrap();
        let diff = out.estimate.axpby(1.0, &b.step1.z_s, -1.0).unwrap().energy();
        assert!(diff <= 1e-24 * b.step1.z_s.energy());
    }

    #[test]
    fn step2_channel_count() {
        let cfg = PipelineConfig {
            compressed: CompressedType::Both,
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.step2_channels(4, 4), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut bundles: Vec<_> = (0..4).map(|k| node(&mut rng, k, 4)).collect();
        exchange(&mut bundles, CompressedType::Both, MaskPolicy::Local).unwrap();
        let out = step2_enhance(&bundles[1], &bundles[1].step1_mask, MaskPolicy::Local, 1.0).unwrap();
        assert_eq!(out.weights.n_channels(), 10);
        assert_eq!(out.origins[4], ChannelOrigin::Received { sender: 0, kind: SignalKind::Target });
    }

    fn toy_scene(noise_scale: f64) -> SceneInput<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let len = 16000;
        let src: Vec<f64> = (0..len)
            .map(|i| if (i / 2000) % 2 == 0 { rng.random_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let noise: Vec<f64> = (0..len).map(|_| rng.random_range(-0.3..0.3) * noise_scale).collect();
        let mut mixtures = Vec::new();
        let mut speech_refs = Vec::new();
        let mut noise_refs = Vec::new();
        for k in 0..3 {
            let mut mics = Vec::new();
            for m in 0..3 {
                let ds = k + m;
                let dn = 2 * k + 3 * m;
                let s: Vec<f64> = (0..len).map(|i| if i >= ds { src[i - ds] } else { 0.0 }).collect();
                let n: Vec<f64> = (0..len)
                    .map(|i| {
                        let coherent = if i >= dn { noise[i - dn] } else { 0.0 };
                        coherent + rng.random_range(-0.1..0.1) * noise_scale
                    })
                    .collect();
                if m == 0 {
                    speech_refs.push(TimeSignal::at_pipeline_rate(s.clone()).unwrap());
                    noise_refs.push(TimeSignal::at_pipeline_rate(n.clone()).unwrap());
                }
                let y = s.iter().zip(&n).map(|(a, b)| a + b).collect();
                mics.push(TimeSignal::at_pipeline_rate(y).unwrap());
            }
            mixtures.push(mics);
        }
        SceneInput {
            scene_id: "toy".into(),
            mixtures,
            speech_refs: Some(speech_refs),
            noise_refs: Some(noise_refs),
        }
    }

    #[test]
    fn run_is_deterministic_and_sized() {
        let scene = toy_scene(1.0);
        let cfg = PipelineConfig {
            compressed: CompressedType::Both,
            ..PipelineConfig::default()
        };
        let a = run_pipeline(&scene, &cfg).unwrap();
        let b = run_pipeline(&scene, &cfg).unwrap();
        assert_eq!(a.step2, b.step2);
        assert_eq!(a.step1.len(), 3);
        assert_eq!(a.step2[0].len(), 16000);
        assert_eq!(a.manifest.nodes[0].step2_channels, 3 + 2 * 2);
        assert!(a.manifest.nodes[0].input_sir_db.is_some());
    }

    #[test]
    fn noise_free_scene_targets_agree() {
        let scene = toy_scene(0.0);
        let target = run_pipeline(&scene, &PipelineConfig::default()).unwrap();
        let both = run_pipeline(
            &scene,
            &PipelineConfig {
                compressed: CompressedType::Both,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        let stft = Stft::<f64>::default();
        let bundle_ref = stft.analyze(&scene.speech_refs.as_ref().unwrap()[0]).unwrap();
        let z = stft.analyze(&target.step1[0]).unwrap();
        let err = z.axpby(1.0, &bundle_ref, -1.0).unwrap().energy() / bundle_ref.energy();
        assert!(err < 1e-4, "{err}");
        for k in 0..3 {
            let a = target.step2[k].samples();
            let b = both.step2[k].samples();
            let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            let s: f64 = a.iter().map(|x| x * x).sum();
            assert!(e <= 1e-10 * s, "{}", e / s);
        }
    }

    #[test]
    fn external_masks_missing_is_resolution_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            step1_masks: MaskProvider::ExternalFile { root: dir.path().to_path_buf() },
            ..PipelineConfig::default()
        };
        assert!(matches!(run_pipeline(&toy_scene(1.0), &cfg), Err(Error::Resolution { .. })));
    }

    #[test]
    fn oracle_masks_reduce_noise() {
        let scene = toy_scene(1.0);
        let out = run_pipeline(&scene, &PipelineConfig::default()).unwrap();
        let stft = Stft::<f64>::default();
        let s = stft.analyze(&scene.speech_refs.as_ref().unwrap()[0]).unwrap();
        let n = stft.analyze(&scene.noise_refs.as_ref().unwrap()[0]).unwrap();
        let mask = irm(&s, &n).unwrap();
        assert!(mask.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let y = &scene.mixtures[0][0];
        let residual = |x: &TimeSignal<f64>| -> f64 {
            x.samples().iter().zip(scene.speech_refs.as_ref().unwrap()[0].samples()).map(|(a, b)| (a - b).powi(2)).sum()
        };
        assert!(residual(&out.step2[0]) < 0.5 * residual(y));
    }
}
