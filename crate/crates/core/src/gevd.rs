//! Generalized eigen-decomposition of a `{R_yy, R_nn}` pencil and the
//! rank-1 speech model derived from it.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// `R_yy = Q diag(σ_y) Qᴴ`, `R_nn = Q diag(σ_n) Qᴴ`, columns ordered by
/// descending `σ_y / σ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GevdDecomposition<T> {
    q: CMatrix<T>,
    q_inv_h: CMatrix<T>,
    sigma_y: Vec<T>,
    sigma_n: Vec<T>,
}

impl<T: Real> GevdDecomposition<T> {
    pub fn q(&self) -> &CMatrix<T> {
        &self.q
    }

    /// `Q⁻ᴴ`.
    pub fn q_inv_h(&self) -> &CMatrix<T> {
        &self.q_inv_h
    }

    pub fn sigma_y(&self) -> &[T] {
        &self.sigma_y
    }

    pub fn sigma_n(&self) -> &[T] {
        &self.sigma_n
    }

    pub fn dim(&self) -> usize {
        self.sigma_y.len()
    }

    /// `σ_s,i = σ_y,i − σ_n,i`.
    pub fn sigma_s(&self) -> Vec<T> {
        self.sigma_y.iter().zip(&self.sigma_n).map(|(&y, &n)| y - n).collect()
    }

    /// Generalized eigenvalues `σ_y,i / σ_n,i`.
    pub fn ratios(&self) -> Vec<T> {
        self.sigma_y.iter().zip(&self.sigma_n).map(|(&y, &n)| y / n).collect()
    }

    /// Principal generalized eigenvector `q₁`.
    pub fn q1(&self) -> Vec<Complex<T>> {
        self.q.column(0)
    }

    /// Projector onto the principal direction as seen from the reference
    /// channel: `t₁ = Q⁻ᴴ e₁ q₁(1)*`.
    pub fn implicit_reference(&self) -> Vec<Complex<T>> {
        let scale = self.q[(0, 0)].conj();
        self.q_inv_h.column(0).into_iter().map(|x| x * scale).collect()
    }

    /// `Q diag(σ_y) Qᴴ`.
    pub fn reconstruct_yy(&self) -> CMatrix<T> {
        self.reconstruct(&self.sigma_y)
    }

    /// `Q diag(σ_n) Qᴴ`.
    pub fn reconstruct_nn(&self) -> CMatrix<T> {
        self.reconstruct(&self.sigma_n)
    }

    fn reconstruct(&self, sigma: &[T]) -> CMatrix<T> {
        self.q.matmul(&CMatrix::diag(sigma)).matmul(&self.q.conj_transpose())
    }
}

/// Generalized eigen-decomposition through the Cholesky factor `R_nn = L Lᴴ`:
/// the Hermitian matrix `L⁻¹ R_yy L⁻ᴴ = U Λ Uᴴ` gives `Q = L U`, `σ_y = λ`,
/// `σ_n = 1`. Each column's phase makes `Q[0, i]` real and non-negative.
pub fn gevd<T: Real>(r_yy: &CMatrix<T>, r_nn: &CMatrix<T>) -> Result<GevdDecomposition<T>> {
    let n = r_yy.rows();
    if !r_yy.is_square() || r_nn.rows() != n || r_nn.cols() != n {
        return Err(Error::Size(format!(
            "pencil of {}x{} and {}x{} matrices",
            r_yy.rows(),
            r_yy.cols(),
            r_nn.rows(),
            r_nn.cols()
        )));
    }
    let l = r_nn.cholesky()?;
    // M = L⁻¹ R_yy, then A = L⁻¹ Mᴴ = L⁻¹ R_yy L⁻ᴴ.
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = l.solve_lower(&r_yy.column(j));
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    let m_h = m.conj_transpose();
    let mut a = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = l.solve_lower(&m_h.column(j));
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    let (lambda, mut u) = a.hermitian_eigen()?;
    let mut q = l.matmul(&u);
    for j in 0..n {
        let lead = q[(0, j)];
        let mag = lead.norm();
        if mag > T::zero() {
            let phase = lead.conj() / mag;
            for i in 0..n {
                q[(i, j)] *= phase;
                u[(i, j)] *= phase;
            }
            q[(0, j)] = Complex::new(mag, T::zero());
        }
    }
    let mut q_inv_h = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = l.solve_lower_conj_transpose(&u.column(j));
        for i in 0..n {
            q_inv_h[(i, j)] = col[i];
        }
    }
    if q.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Conditioning("non-finite generalized eigenvectors".into()));
    }
    Ok(GevdDecomposition {
        q,
        q_inv_h,
        sigma_y: lambda,
        sigma_n: vec![T::one(); n],
    })
}

/// Rank-1 speech covariance `R_sr1 = σ_s1 q₁ q₁ᴴ` with `σ_s1 = max(σ_y1 − σ_n1, 0)`.
pub fn rank1_speech<T: Real>(dec: &GevdDecomposition<T>) -> CMatrix<T> {
    let sigma = (dec.sigma_y[0] - dec.sigma_n[0]).max(T::zero());
    if sigma.is_zero() {
        return CMatrix::zeros(dec.dim(), dec.dim());
    }
    CMatrix::outer(&dec.q1()).scaled(sigma)
}
