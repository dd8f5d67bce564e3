//! Mask-weighted spatial covariance estimation over stacked channels.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::mask::TfMask;
use crate::scalar::Real;
use crate::stft::Spectrogram;

/// Diagonal loading relative to `trace / C` in double precision.
pub const LOADING: f64 = 1e-9;

/// Relative loading used for scalar type `T`: [`LOADING`], raised to
/// `100·ε` where the type cannot resolve it (single precision).
pub fn loading<T: Real>() -> T {
    T::lit(LOADING).max(T::epsilon() * T::lit(100.0))
}

/// Which estimate a compressed signal carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Target,
    Noise,
}

/// Where a stacked channel comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "lowercase")]
pub enum ChannelOrigin {
    /// Local microphone, counted from 0.
    Local { mic: usize },
    /// Compressed signal received from another node (0-based).
    Received { sender: usize, kind: SignalKind },
}

/// How masks are applied to received channels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskPolicy {
    /// The receiving node's own mask weights every channel.
    #[default]
    Local,
    /// Received channels are weighted by their sender's mask.
    Distant,
}

/// `ỹ = [y; z₋ₖ]`: local channels first, then received ones. Channel 0 is
/// the reference.
#[derive(Clone, Debug)]
pub struct StackedSpectra<T> {
    channels: Vec<Spectrogram<T>>,
    origins: Vec<ChannelOrigin>,
    sender_masks: Vec<Option<TfMask<T>>>,
}

impl<T: Real> StackedSpectra<T> {
    /// Local microphone channels only.
    pub fn local(channels: Vec<Spectrogram<T>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Empty("no channels to stack".into()));
        }
        let n = channels.len();
        let stacked = Self {
            origins: (0..n).map(|mic| ChannelOrigin::Local { mic }).collect(),
            sender_masks: vec![None; n],
            channels,
        };
        for c in &stacked.channels[1..] {
            stacked.check_grid(c)?;
        }
        Ok(stacked)
    }

    fn check_grid(&self, spec: &Spectrogram<T>) -> Result<()> {
        if !self.channels[0].same_grid(spec) {
            return Err(Error::Size(format!(
                "channel grid {}x{} differs from reference {}x{}",
                spec.n_bins(),
                spec.n_frames(),
                self.channels[0].n_bins(),
                self.channels[0].n_frames()
            )));
        }
        Ok(())
    }

    /// Appends a received compressed signal, with the sender's mask when
    /// one was transmitted.
    pub fn push_received(
        &mut self,
        sender: usize,
        kind: SignalKind,
        signal: Spectrogram<T>,
        sender_mask: Option<TfMask<T>>,
    ) -> Result<()> {
        self.check_grid(&signal)?;
        if let Some(m) = &sender_mask {
            m.ensure_grid(&signal)?;
        }
        self.channels.push(signal);
        self.origins.push(ChannelOrigin::Received { sender, kind });
        self.sender_masks.push(sender_mask);
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_bins(&self) -> usize {
        self.channels[0].n_bins()
    }

    pub fn n_frames(&self) -> usize {
        self.channels[0].n_frames()
    }

    pub fn channels(&self) -> &[Spectrogram<T>] {
        &self.channels
    }

    pub fn channel(&self, c: usize) -> &Spectrogram<T> {
        &self.channels[c]
    }

    pub fn origins(&self) -> &[ChannelOrigin] {
        &self.origins
    }

    pub fn reference(&self) -> &Spectrogram<T> {
        &self.channels[0]
    }

    /// `ỹ(f, t)` as a vector over channels.
    pub fn vector(&self, f: usize, t: usize) -> Vec<Complex<T>> {
        self.channels.iter().map(|c| c.get(f, t)).collect()
    }
}

/// Per-frequency speech and noise covariance estimates.
#[derive(Clone, Debug)]
pub struct CovariancePair<T> {
    pub r_ss: Vec<CMatrix<T>>,
    pub r_nn: Vec<CMatrix<T>>,
    pub n_frames: usize,
    /// Bins whose noise statistics were empty and replaced by a loaded identity.
    pub degenerate_noise_bins: Vec<usize>,
    /// Same for the speech statistics.
    pub degenerate_speech_bins: Vec<usize>,
}

impl<T: Real> CovariancePair<T> {
    /// `R_yy = R_ss + R_nn` at bin `f`.
    pub fn r_yy(&self, f: usize) -> CMatrix<T> {
        self.r_ss[f].add(&self.r_nn[f])
    }

    pub fn n_bins(&self) -> usize {
        self.r_ss.len()
    }

    pub fn n_channels(&self) -> usize {
        self.r_ss.first().map_or(0, |m| m.rows())
    }

    /// The same statistics with the roles of speech and noise exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            r_ss: self.r_nn.clone(),
            r_nn: self.r_ss.clone(),
            n_frames: self.n_frames,
            degenerate_noise_bins: self.degenerate_speech_bins.clone(),
            degenerate_speech_bins: self.degenerate_noise_bins.clone(),
        }
    }
}

fn weighted_covariance<T: Real>(stacked: &StackedSpectra<T>, f: usize, weights: &[&[T]]) -> CMatrix<T> {
    let c = stacked.n_channels();
    let n_frames = stacked.n_frames();
    let bins: Vec<&[Complex<T>]> = stacked.channels.iter().map(|ch| ch.bin(f)).collect();
    let mut acc = CMatrix::zeros(c, c);
    let mut v = vec![Complex::zero(); c];
    for t in 0..n_frames {
        for ch in 0..c {
            v[ch] = bins[ch][t] * weights[ch][t];
        }
        for i in 0..c {
            for j in i..c {
                acc[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let scale = T::one() / T::from_usize_lossy(n_frames);
    CMatrix::from_fn(c, c, |i, j| {
        if i <= j {
            acc[(i, j)] * scale
        } else {
            acc[(j, i)].conj() * scale
        }
    })
}

fn regularize<T: Real>(m: &mut CMatrix<T>, fallback_trace: T) -> bool {
    let c = T::from_usize_lossy(m.rows());
    let delta = loading::<T>();
    let trace = m.trace();
    if trace > T::zero() {
        m.add_diagonal(delta * trace / c);
        false
    } else {
        let base = if fallback_trace > T::zero() { fallback_trace / c } else { T::one() };
        *m = CMatrix::identity(m.rows()).scaled(delta * base);
        true
    }
}

/// Frame-mean of masked outer products, `R = (1/T) Σ_t (m ⊙ ỹ)(m ⊙ ỹ)ᴴ`,
/// for the speech mask and its complement, with diagonal loading
/// `δ · trace/C`.
///
/// Under [`MaskPolicy::Distant`] received channels use their sender's mask;
/// under [`MaskPolicy::Local`] `mask` weights every channel.
pub fn masked_covariances<T: Real>(
    stacked: &StackedSpectra<T>,
    mask: &TfMask<T>,
    policy: MaskPolicy,
) -> Result<CovariancePair<T>> {
    if stacked.n_frames() == 0 {
        return Err(Error::Empty("no frames for covariance estimation".into()));
    }
    mask.ensure_grid(stacked.reference())?;
    let masks: Vec<&TfMask<T>> = (0..stacked.n_channels())
        .map(|c| match (policy, &stacked.origins[c], &stacked.sender_masks[c]) {
            (MaskPolicy::Distant, ChannelOrigin::Received { sender, .. }, None) => Err(Error::Protocol(format!(
                "distant mask policy but no mask received from node {}",
                sender + 1
            ))),
            (MaskPolicy::Distant, ChannelOrigin::Received { .. }, Some(m)) => Ok(m),
            _ => Ok(mask),
        })
        .collect::<Result<_>>()?;

    let n_bins = stacked.n_bins();
    let mut pair = CovariancePair {
        r_ss: Vec::with_capacity(n_bins),
        r_nn: Vec::with_capacity(n_bins),
        n_frames: stacked.n_frames(),
        degenerate_noise_bins: Vec::new(),
        degenerate_speech_bins: Vec::new(),
    };
    for f in 0..n_bins {
        let speech_w: Vec<&[T]> = masks.iter().map(|m| m.bin(f)).collect();
        let noise_w: Vec<&[T]> = masks.iter().map(|m| m.complement_bin(f)).collect();
        let mut r_ss = weighted_covariance(stacked, f, &speech_w);
        let mut r_nn = weighted_covariance(stacked, f, &noise_w);
        let (tr_ss, tr_nn) = (r_ss.trace(), r_nn.trace());
        if regularize(&mut r_ss, tr_nn) {
            pair.degenerate_speech_bins.push(f);
        }
        if regularize(&mut r_nn, tr_ss) {
            pair.degenerate_noise_bins.push(f);
        }
        pair.r_ss.push(r_ss);
        pair.r_nn.push(r_nn);
    }
    if !pair.degenerate_noise_bins.is_empty() {
        log::warn!(
            "noise statistics empty in {} of {n_bins} bins; using loaded identity",
            pair.degenerate_noise_bins.len()
        );
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_support::random_complex;
    use proptest::prelude::*;
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

    #[test]
    fn loading_per_precision() {
        assert_eq!(loading::<f64>(), LOADING);
        assert!(loading::<f32>() >= 100.0 * f32::EPSILON);
        assert!(1.0f32 + loading::<f32>() > 1.0);
    }

    fn loaded(mut m: CMatrix<f64>) -> CMatrix<f64> {
        let c = m.rows() as f64;
        let tr = m.trace();
        m.add_diagonal(LOADING * tr / c);
        m
    }

    /// Naive double loop over frames and channel pairs.
    fn brute_force(chans: &[Spectrogram<f64>], weights: &[Vec<f64>], f: usize) -> CMatrix<f64> {
        let c = chans.len();
        let t_len = chans[0].n_frames();
        let mut m = CMatrix::zeros(c, c);
        for i in 0..c {
            for j in 0..c {
                let mut s = Complex::new(0.0, 0.0);
                for t in 0..t_len {
                    let a = chans[i].get(f, t) * weights[i][t];
                    let b = chans[j].get(f, t) * weights[j][t];
                    s += a * b.conj();
                }
                m[(i, j)] = s / t_len as f64;
            }
        }
        loaded(m)
    }

    fn rel_diff(a: &CMatrix<f64>, b: &CMatrix<f64>) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chans: Vec<_> = (0..4).map(|_| random_spec(&mut rng, 64, 50)).collect();
        let mask = random_mask(&mut rng, 64, 50);
        let stacked = StackedSpectra::local(chans.clone()).unwrap();
        let pair = masked_covariances(&stacked, &mask, MaskPolicy::Local).unwrap();
        for f in 0..64 {
            let w: Vec<Vec<f64>> = (0..4).map(|_| mask.bin(f).to_vec()).collect();
            let wc: Vec<Vec<f64>> = (0..4).map(|_| mask.complement_bin(f).to_vec()).collect();
            assert!(rel_diff(&pair.r_ss[f], &brute_force(&chans, &w, f)) < 1e-12);
            assert!(rel_diff(&pair.r_nn[f], &brute_force(&chans, &wc, f)) < 1e-12);
        }
    }

    #[test]
    fn all_ones_mask_single_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = random_spec(&mut rng, 8, 40);
        let stacked = StackedSpectra::local(vec![spec.clone()]).unwrap();
        let mask = TfMask::constant(8, 40, 1.0).unwrap();
        let pair = masked_covariances(&stacked, &mask, MaskPolicy::Local).unwrap();
        assert_eq!(pair.degenerate_noise_bins, (0..8).collect::<Vec<_>>());
        for f in 0..8 {
            let mean: f64 = spec.bin(f).iter().map(|z| z.norm_sqr()).sum::<f64>() / 40.0;
            assert!((pair.r_ss[f][(0, 0)].re - mean * (1.0 + LOADING)).abs() < 1e-12 * mean);
            assert!((pair.r_nn[f][(0, 0)].re - LOADING * mean).abs() < 1e-12 * LOADING * mean);
        }
    }

    #[test]
    fn duplicated_channel_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = random_spec(&mut rng, 4, 30);
        let stacked = StackedSpectra::local(vec![spec.clone(), spec]).unwrap();
        let mask = random_mask(&mut rng, 4, 30);
        let pair = masked_covariances(&stacked, &mask, MaskPolicy::Local).unwrap();
        for r in &pair.r_ss {
            let (vals, _) = r.hermitian_eigen().unwrap();
            assert!(vals[1] <= 1e-8 * r.trace());
        }
    }

    #[test]
    fn half_mask_gives_equal_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let chans: Vec<_> = (0..3).map(|_| random_spec(&mut rng, 5, 20)).collect();
        let stacked = StackedSpectra::local(chans.clone()).unwrap();
        let mask = TfMask::constant(5, 20, 0.5).unwrap();
        let pair = masked_covariances(&stacked, &mask, MaskPolicy::Local).unwrap();
        let ones = vec![vec![1.0; 20]; 3];
        for f in 0..5 {
            assert_eq!(pair.r_ss[f], pair.r_nn[f]);
            let full = brute_force(&chans, &ones, f);
            assert!(rel_diff(&pair.r_ss[f], &full.scaled(0.25)) < 1e-12);
        }
    }

    #[test]
    fn distant_policy_uses_sender_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let local = random_spec(&mut rng, 3, 10);
        let remote = random_spec(&mut rng, 3, 10);
        let own = random_mask(&mut rng, 3, 10);
        let theirs = random_mask(&mut rng, 3, 10);
        let mut stacked = StackedSpectra::local(vec![local.clone()]).unwrap();
        stacked
            .push_received(2, SignalKind::Target, remote.clone(), Some(theirs.clone()))
            .unwrap();
        let pair = masked_covariances(&stacked, &own, MaskPolicy::Distant).unwrap();
        for f in 0..3 {
            let w = vec![own.bin(f).to_vec(), theirs.bin(f).to_vec()];
            assert!(rel_diff(&pair.r_ss[f], &brute_force(&[local.clone(), remote.clone()], &w, f)) < 1e-12);
        }
        let local_pair = masked_covariances(&stacked, &own, MaskPolicy::Local).unwrap();
        assert!(rel_diff(&local_pair.r_ss[0], &pair.r_ss[0]) > 1e-6);

        let mut bare = StackedSpectra::local(vec![local]).unwrap();
        bare.push_received(2, SignalKind::Target, remote, None).unwrap();
        assert!(matches!(
            masked_covariances(&bare, &own, MaskPolicy::Distant),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn grid_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let stacked = StackedSpectra::local(vec![random_spec(&mut rng, 4, 10)]).unwrap();
        let mask = TfMask::constant(4, 11, 0.5).unwrap();
        assert!(masked_covariances(&stacked, &mask, MaskPolicy::Local).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hermitian_and_psd(seed in any::<u64>(), c in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chans: Vec<_> = (0..c).map(|_| random_spec(&mut rng, 6, 12)).collect();
            let mask = random_mask(&mut rng, 6, 12);
            let pair = masked_covariances(&StackedSpectra::local(chans).unwrap(), &mask, MaskPolicy::Local).unwrap();
            for r in pair.r_ss.iter().chain(&pair.r_nn) {
                prop_assert!(r.hermitian_defect() <= 1e-12 * r.frobenius_norm());
                for i in 0..c {
                    prop_assert!(r[(i, i)].re >= 0.0 && r[(i, i)].im == 0.0);
                }
                let (vals, _) = r.hermitian_eigen().unwrap();
                prop_assert!(*vals.last().unwrap() >= -1e-10 * r.trace());
            }
        }

        #[test]
        fn raising_mask_never_lowers_speech_trace(seed in any::<u64>(), bump in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chans: Vec<_> = (0..3).map(|_| random_spec(&mut rng, 4, 10)).collect();
            let stacked = StackedSpectra::local(chans).unwrap();
            let low = random_mask(&mut rng, 4, 10);
            let high = TfMask::from_values(4, 10, low.values().iter().map(|v| v + (1.0 - v) * bump).collect()).unwrap();
            let a = masked_covariances(&stacked, &low, MaskPolicy::Local).unwrap();
            let b = masked_covariances(&stacked, &high, MaskPolicy::Local).unwrap();
            for f in 0..4 {
                prop_assert!(b.r_ss[f].trace() >= a.r_ss[f].trace() * (1.0 - 1e-12));
            }
        }
    }
}
