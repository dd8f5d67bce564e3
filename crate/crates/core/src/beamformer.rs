//! Speech-distortion-weighted multichannel Wiener filters and their
//! application to stacked spectra.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::gevd::{gevd, rank1_speech, GevdDecomposition};
use crate::linalg::CMatrix;
use crate::scalar::Real;
use crate::spatial::{CovariancePair, StackedSpectra};
use crate::stft::Spectrogram;

/// One filter per frequency bin.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerWeights<T> {
    pub per_bin: Vec<Vec<Complex<T>>>,
    pub ref_index: usize,
    pub mu: T,
}

impl<T: Real> BeamformerWeights<T> {
    pub fn n_channels(&self) -> usize {
        self.per_bin.first().map_or(0, Vec::len)
    }

    /// Selects channel `ref_index` unchanged at every bin.
    pub fn selector(n_bins: usize, n_channels: usize, ref_index: usize) -> Self {
        let mut e = vec![Complex::zero(); n_channels];
        e[ref_index] = Complex::new(T::one(), T::zero());
        Self {
            per_bin: vec![e; n_bins],
            ref_index,
            mu: T::zero(),
        }
    }
}

fn check_mu<T: Real>(mu: T) -> Result<()> {
    if !(mu >= T::zero()) || !mu.is_finite() {
        return Err(Error::Config(format!("mu must be finite and non-negative, got {mu}")));
    }
    Ok(())
}

/// `w = (R_s + μ R_nn)⁻¹ R_s e_ref`, by a linear solve. A zero `R_s e_ref`
/// yields the zero filter.
fn sdw_solve<T: Real>(r_s: &CMatrix<T>, r_nn: &CMatrix<T>, mu: T, ref_index: usize) -> Result<Vec<Complex<T>>> {
    check_mu(mu)?;
    let n = r_s.rows();
    if r_nn.rows() != n || ref_index >= n {
        return Err(Error::Size(format!(
            "filter of size {n} with noise matrix {} and reference {ref_index}",
            r_nn.rows()
        )));
    }
    let rhs = r_s.column(ref_index);
    if rhs.iter().all(|z| z.is_zero()) {
        return Ok(vec![Complex::zero(); n]);
    }
    let system = r_s.add(&r_nn.scaled(mu));
    let w = system.solve(&rhs)?;
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Conditioning("non-finite filter weights".into()));
    }
    Ok(w)
}

/// SDW-MWF on the rank-1 speech model: `w = (R_sr1 + μ R_nn)⁻¹ R_sr1 e_ref`.
pub fn sdw_mwf_weights<T: Real>(
    r_sr1: &CMatrix<T>,
    r_nn: &CMatrix<T>,
    mu: T,
    ref_index: usize,
) -> Result<Vec<Complex<T>>> {
    sdw_solve(r_sr1, r_nn, mu, ref_index)
}

/// Full-rank SDW-MWF: `w = (R_ss + μ R_nn)⁻¹ R_ss e_ref`.
pub fn baseline_mwf_weights<T: Real>(
    r_ss: &CMatrix<T>,
    r_nn: &CMatrix<T>,
    mu: T,
    ref_index: usize,
) -> Result<Vec<Complex<T>>> {
    sdw_solve(r_ss, r_nn, mu, ref_index)
}

/// The same filter expressed in the generalized eigenbasis,
/// `σ_s1 / (σ_s1 + μ σ_n1) · Q⁻ᴴ e₁ q₁(1)*`. Used when the direct solve is
/// too ill-conditioned for the scalar type.
pub fn gevd_closed_form<T: Real>(dec: &GevdDecomposition<T>, mu: T) -> Vec<Complex<T>> {
    let sigma = (dec.sigma_y()[0] - dec.sigma_n()[0]).max(T::zero());
    let gain = sigma / (sigma + mu * dec.sigma_n()[0]);
    dec.implicit_reference().into_iter().map(|z| z * gain).collect()
}

/// GEVD-based SDW-MWF at every bin: `R_yy = R_ss + R_nn`, rank-1 speech from
/// the `{R_yy, R_nn}` pencil, then the filter for reference channel 0.
pub fn gevd_sdw_filter<T: Real>(cov: &CovariancePair<T>, mu: T) -> Result<BeamformerWeights<T>> {
    let per_bin = (0..cov.n_bins())
        .map(|f| {
            let dec = gevd(&cov.r_yy(f), &cov.r_nn[f])?;
            match sdw_mwf_weights(&rank1_speech(&dec), &cov.r_nn[f], mu, 0) {
                Err(Error::Conditioning(_)) if mu > T::zero() => Ok(gevd_closed_form(&dec, mu)),
                other => other,
            }
        })
        .collect::<Result<_>>()?;
    Ok(BeamformerWeights {
        per_bin,
        ref_index: 0,
        mu,
    })
}

/// Full-rank SDW-MWF at every bin, for comparison with the GEVD variant.
pub fn baseline_filter<T: Real>(cov: &CovariancePair<T>, mu: T) -> Result<BeamformerWeights<T>> {
    let per_bin = (0..cov.n_bins())
        .map(|f| baseline_mwf_weights(&cov.r_ss[f], &cov.r_nn[f], mu, 0))
        .collect::<Result<_>>()?;
    Ok(BeamformerWeights {
        per_bin,
        ref_index: 0,
        mu,
    })
}

/// `ŝ(f, t) = w(f)ᴴ ỹ(f, t)`.
pub fn apply_weights<T: Real>(w: &BeamformerWeights<T>, stacked: &StackedSpectra<T>) -> Result<Spectrogram<T>> {
    if w.per_bin.len() != stacked.n_bins() || w.n_channels() != stacked.n_channels() {
        return Err(Error::Size(format!(
            "weights {}x{} for stack of {} bins and {} channels",
            w.per_bin.len(),
            w.n_channels(),
            stacked.n_bins(),
            stacked.n_channels()
        )));
    }
    let mut out = stacked.reference().clone();
    let n_frames = stacked.n_frames();
    for (f, wf) in w.per_bin.iter().enumerate() {
        let bins: Vec<&[Complex<T>]> = stacked.channels().iter().map(|c| c.bin(f)).collect();
        let dst = out.bin_mut(f);
        for t in 0..n_frames {
            let mut acc = Complex::zero();
            for (wc, bc) in wf.iter().zip(&bins) {
                acc += wc.conj() * bc[t];
            }
            dst[t] = acc;
        }
    }
    Ok(out)
}
