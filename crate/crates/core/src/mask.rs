//! Time-frequency masks: ideal ratio masks, complements and the provider
//! seam through which oracle or externally estimated masks enter the
//! pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Real;
use crate::stft::Spectrogram;

/// A real mask in [0, 1] on a spectrogram grid, stored bin-major.
///
/// The complement is materialised alongside the values so that taking the
/// complement twice returns the original bits, and so speech/noise roles can
/// be swapped without rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct TfMask<T> {
    n_bins: usize,
    n_frames: usize,
    values: Vec<T>,
    complement: Vec<T>,
}

impl<T: Real> TfMask<T> {
    /// Validates the range and derives the complement as `1 − v`.
    pub fn from_values(n_bins: usize, n_frames: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_bins * n_frames {
            return Err(Error::Size(format!(
                "{} mask values for a {n_bins}x{n_frames} grid",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::Format(format!("mask value {bad} outside [0, 1]")));
        }
        let complement = values.iter().map(|&v| T::one() - v).collect();
        Ok(Self {
            n_bins,
            n_frames,
            values,
            complement,
        })
    }

    pub fn constant(n_bins: usize, n_frames: usize, value: T) -> Result<Self> {
        Self::from_values(n_bins, n_frames, vec![value; n_bins * n_frames])
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn complement_values(&self) -> &[T] {
        &self.complement
    }

    /// Mask values of frequency bin `f` across frames.
    pub fn bin(&self, f: usize) -> &[T] {
        &self.values[f * self.n_frames..(f + 1) * self.n_frames]
    }

    pub fn complement_bin(&self, f: usize) -> &[T] {
        &self.complement[f * self.n_frames..(f + 1) * self.n_frames]
    }

    #[inline]
    pub fn get(&self, f: usize, t: usize) -> T {
        self.values[f * self.n_frames + t]
    }

    /// `1 − m`, exact involution.
    pub fn complement(&self) -> Self {
        Self {
            n_bins: self.n_bins,
            n_frames: self.n_frames,
            values: self.complement.clone(),
            complement: self.values.clone(),
        }
    }

    pub fn matches_grid(&self, spec: &Spectrogram<T>) -> bool {
        self.n_bins == spec.n_bins() && self.n_frames == spec.n_frames()
    }

    pub fn ensure_grid(&self, spec: &Spectrogram<T>) -> Result<()> {
        if self.matches_grid(spec) {
            Ok(())
        } else {
            Err(Error::Size(format!(
                "mask grid {}x{} does not match spectrogram {}x{}",
                self.n_bins,
                self.n_frames,
                spec.n_bins(),
                spec.n_frames()
            )))
        }
    }

    pub fn cast<U: Real>(&self) -> TfMask<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::lit(x.to_f64_lossy())).collect();
        TfMask {
            n_bins: self.n_bins,
            n_frames: self.n_frames,
            values: conv(&self.values),
            complement: conv(&self.complement),
        }
    }
}

/// Which magnitude statistic the ideal ratio mask is built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrmKind {
    /// `|S| / (|S| + |N|)`
    #[default]
    Magnitude,
    /// `|S|² / (|S|² + |N|²)`
    Power,
}

/// Ideal ratio mask with the magnitude rule. Cells where both spectra vanish
/// get 0.5.
pub fn irm<T: Real>(speech: &Spectrogram<T>, noise: &Spectrogram<T>) -> Result<TfMask<T>> {
    irm_with(speech, noise, IrmKind::Magnitude)
}

pub fn irm_with<T: Real>(
    speech: &Spectrogram<T>,
    noise: &Spectrogram<T>,
    kind: IrmKind,
) -> Result<TfMask<T>> {
    if !speech.same_grid(noise) {
        return Err(Error::Size("speech and noise spectrograms differ in grid".into()));
    }
    let half = T::lit(0.5);
    let mut values = Vec::with_capacity(speech.as_slice().len());
    let mut complement = Vec::with_capacity(values.capacity());
    for (s, n) in speech.as_slice().iter().zip(noise.as_slice()) {
        let (a, b) = match kind {
            IrmKind::Magnitude => (s.norm(), n.norm()),
            IrmKind::Power => (s.norm_sqr(), n.norm_sqr()),
        };
        let total = a + b;
        if total > T::zero() && total.is_finite() {
            values.push(a / total);
            complement.push(b / total);
        } else {
            values.push(half);
            complement.push(half);
        }
    }
    Ok(TfMask {
        n_bins: speech.n_bins(),
        n_frames: speech.n_frames(),
        values,
        complement,
    })
}

/// Which filtering step a mask is requested for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Step {
    pub fn number(self) -> u8 {
        match self {
            Step::One => 1,
            Step::Two => 2,
        }
    }
}

/// Source of the masks that drive covariance estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MaskProvider {
    /// Ideal ratio mask from the clean images at the node's reference mic.
    OracleIrm {
        #[serde(default)]
        kind: IrmKind,
    },
    /// MSK1 files under `<root>/masks/<scene_id>/node<k>_step<s>.msk`
    /// (`k` counted from 1).
    ExternalFile { root: PathBuf },
}

impl Default for MaskProvider {
    fn default() -> Self {
        MaskProvider::OracleIrm {
            kind: IrmKind::Magnitude,
        }
    }
}

/// Where a mask for (scene, node, step) lives under a run or corpus root.
pub fn mask_path(root: &Path, scene_id: &str, node: usize, step: Step) -> PathBuf {
    root.join("masks")
        .join(scene_id)
        .join(format!("node{}_step{}.msk", node + 1, step.number()))
}

/// What a provider may look at for one node.
#[derive(Clone, Copy, Debug)]
pub struct NodeReference<'a, T> {
    /// Mixture at the node's reference mic; defines the requested grid.
    pub mixture: &'a Spectrogram<T>,
    /// Clean speech image at the reference mic (oracle mode only).
    pub speech: Option<&'a Spectrogram<T>>,
    /// Clean noise image at the reference mic (oracle mode only).
    pub noise: Option<&'a Spectrogram<T>>,
}

impl MaskProvider {
    pub fn describe(&self) -> String {
        match self {
            MaskProvider::OracleIrm { kind } => format!("oracle_irm:{kind:?}").to_lowercase(),
            MaskProvider::ExternalFile { root } => format!("dir:{}", root.display()),
        }
    }

    /// Fetches the mask for `node` at `step`, verifying it matches the grid
    /// of the node's reference mixture.
    pub fn get_mask<T: Real>(
        &self,
        scene_id: &str,
        node: usize,
        step: Step,
        reference: NodeReference<'_, T>,
    ) -> Result<TfMask<T>> {
        let mask = match self {
            MaskProvider::OracleIrm { kind } => {
                let (Some(s), Some(n)) = (reference.speech, reference.noise) else {
                    return Err(Error::Config(format!(
                        "oracle masks need clean images for scene {scene_id}, node {}",
                        node + 1
                    )));
                };
                irm_with(s, n, *kind)?
            }
            MaskProvider::ExternalFile { root } => {
                let path = mask_path(root, scene_id, node, step);
                if !path.is_file() {
                    return Err(Error::Resolution {
                        scene: scene_id.to_string(),
                        node: node + 1,
                        step: step.number(),
                        path,
                    });
                }
                let loaded = io::load_mask(&path)?;
                if loaded.clamped > 0 {
                    log::warn!("{}: clamped {} mask values", path.display(), loaded.clamped);
                }
                loaded.mask.cast()
            }
        };
        mask.ensure_grid(reference.mixture)?;
        Ok(mask)
    }

    /// Checks that every mask file a run will need exists, before any audio
    /// work starts.
    pub fn preflight(&self, scene_ids: &[String], n_nodes: usize, step: Step) -> Result<()> {
        let MaskProvider::ExternalFile { root } = self else {
            return Ok(());
        };
        if !root.is_dir() {
            return Err(Error::Resolution {
                scene: scene_ids.first().cloned().unwrap_or_default(),
                node: 1,
                step: step.number(),
                path: root.clone(),
            });
        }
        for scene in scene_ids {
            for node in 0..n_nodes {
                let path = mask_path(root, scene, node, step);
                if !path.is_file() {
                    return Err(Error::Resolution {
                        scene: scene.clone(),
                        node: node + 1,
                        step: step.number(),
                        path,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec_from(values: Vec<Complex<f64>>) -> Spectrogram<f64> {
        let frames = values.len() / crate::stft::N_BINS;
        Spectrogram::from_bins(frames, values).unwrap()
    }

    fn random_spec(rng: &mut ChaCha8Rng, frames: usize, zero_frac: f64) -> Spectrogram<f64> {
        spec_from(
            (0..crate::stft::N_BINS * frames)
                .map(|_| {
                    if rng.random_bool(zero_frac) {
                        Complex::new(0.0, 0.0)
                    } else {
                        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn irm_cases() {
        let n = crate::stft::N_BINS * 2;
        let s = spec_from(vec![Complex::new(3.0, 0.0); n]);
        let nz = spec_from(vec![Complex::new(0.0, -1.0); n]);
        let m = irm(&s, &nz).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.75));

        let zero = spec_from(vec![Complex::new(0.0, 0.0); n]);
        assert!(irm(&s, &zero).unwrap().values().iter().all(|&v| v == 1.0));
        assert!(irm(&zero, &zero).unwrap().values().iter().all(|&v| v == 0.5));
        assert!(irm(&s, &s).unwrap().values().iter().all(|&v| v == 0.5));
        assert!(irm_with(&s, &nz, IrmKind::Power)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.9));
    }

    #[test]
    fn irm_grid_mismatch() {
        let a = spec_from(vec![Complex::new(1.0, 0.0); crate::stft::N_BINS * 2]);
        let b = spec_from(vec![Complex::new(1.0, 0.0); crate::stft::N_BINS * 3]);
        assert!(matches!(irm(&a, &b), Err(Error::Size(_))));
    }

    #[test]
    fn complement_cases() {
        let m = TfMask::constant(4, 3, 0.25f64).unwrap();
        assert!(m.complement().values().iter().all(|&v| v == 0.75));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_spec(&mut rng, 3, 0.1);
        let n = random_spec(&mut rng, 3, 0.1);
        let a = irm(&s, &n).unwrap();
        let b = irm(&n, &s).unwrap();
        assert_eq!(a.complement(), b);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x + y - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(TfMask::from_values(1, 2, vec![0.5, 1.5f64]).is_err());
        assert!(TfMask::from_values(1, 2, vec![0.5, f64::NAN]).is_err());
        assert!(TfMask::from_values(1, 3, vec![0.5, 0.5f64]).is_err());
    }

    #[test]
    fn oracle_provider_on_noise_free_scene() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_spec(&mut rng, 4, 0.05);
        let zero = spec_from(vec![Complex::new(0.0, 0.0); crate::stft::N_BINS * 4]);
        let m = MaskProvider::default()
            .get_mask(
                "scene",
                0,
                Step::One,
                NodeReference {
                    mixture: &s,
                    speech: Some(&s),
                    noise: Some(&zero),
                },
            )
            .unwrap();
        for (v, x) in m.values().iter().zip(s.as_slice()) {
            let expect = if x.norm() == 0.0 { 0.5 } else { 1.0 };
            assert_eq!(*v, expect);
        }
    }

    #[test]
    fn external_provider_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let provider = MaskProvider::ExternalFile {
            root: dir.path().to_path_buf(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mix = random_spec(&mut rng, 5, 0.0);
        let reference = NodeReference {
            mixture: &mix,
            speech: None,
            noise: None,
        };
        match provider.get_mask::<f64>("s01", 2, Step::Two, reference) {
            Err(Error::Resolution { scene, node, step, .. }) => {
                assert_eq!((scene.as_str(), node, step), ("s01", 3, 2))
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
        let values: Vec<f32> = (0..crate::stft::N_BINS * 5).map(|_| rng.random::<f32>()).collect();
        let stored = TfMask::from_values(crate::stft::N_BINS, 5, values).unwrap();
        let path = mask_path(dir.path(), "s01", 2, Step::Two);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        io::store_mask(&stored, &path).unwrap();
        let got = provider.get_mask::<f32>("s01", 2, Step::Two, NodeReference {
            mixture: &mix.clone_cast(),
            speech: None,
            noise: None,
        });
        assert_eq!(got.unwrap().values(), stored.values());

        let short = random_spec(&mut rng, 4, 0.0);
        let err = provider.get_mask::<f64>("s01", 2, Step::Two, NodeReference {
            mixture: &short,
            speech: None,
            noise: None,
        });
        assert!(matches!(err, Err(Error::Size(_))));
    }

    impl Spectrogram<f64> {
        fn clone_cast(&self) -> Spectrogram<f32> {
            Spectrogram::from_bins(
                self.n_frames(),
                self.as_slice()
                    .iter()
                    .map(|z| Complex::new(z.re as f32, z.im as f32))
                    .collect(),
            )
            .unwrap()
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn irm_bounded_and_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_spec(&mut rng, 2, 0.2);
                let n = random_spec(&mut rng, 2, 0.2);
                let m = irm(&s, &n).unwrap();
                prop_assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
                let sc = s.axpby(c, &s, 0.0).unwrap();
                let nc = n.axpby(c, &n, 0.0).unwrap();
                let mc = irm(&sc, &nc).unwrap();
                for (a, b) in m.values().iter().zip(mc.values()) {
                    prop_assert!((a - b).abs() <= 1e-14);
                }
            }

            #[test]
            fn complement_is_involution(values in proptest::collection::vec(0.0f64..=1.0, 12)) {
                let m = TfMask::from_values(3, 4, values).unwrap();
                prop_assert_eq!(m.complement().complement(), m);
            }
        }
    }
}
