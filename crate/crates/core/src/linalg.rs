//! Small dense complex matrices: the per-frequency workhorse.
//!
//! Channel counts are tiny (C ≤ 10 in the pipeline), so everything here is
//! plain row-major storage with textbook O(C³) kernels.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    /// `v vᴴ`.
    pub fn outer(v: &[Complex<T>]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "mat_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Adds `s` to every diagonal entry.
    pub fn add_diagonal(&mut self, s: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)].re += s;
        }
    }

    /// Real part of the trace.
    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest elementwise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Overwrites the matrix with its Hermitian part, forcing a real diagonal.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            self[(i, i)].im = T::zero();
            for j in (i + 1)..self.cols {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * half;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    /// Lower-triangular `L` with `self = L Lᴴ`.
    pub fn cholesky(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Size("cholesky of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Conditioning(format!(
                    "matrix is not positive definite (pivot {j} = {d})"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Solves `L x = b` for lower-triangular `self`.
    pub fn solve_lower(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.rows;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self[(i, k)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Solves `Lᴴ x = b` for lower-triangular `self`.
    pub fn solve_lower_conj_transpose(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.rows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self[(k, i)].conj() * x[k];
            }
            x[i] = s / self[(i, i)].conj();
        }
        x
    }

    /// Solves `self · x = b` by Gaussian elimination with partial pivoting.
    ///
    /// A pivot below `n · ε · max|a_ij|` is reported as a conditioning error.
    pub fn solve(&self, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if !self.is_square() || b.len() != self.rows {
            return Err(Error::Size(format!(
                "solve: {}x{} system with rhs of length {}",
                self.rows,
                self.cols,
                b.len()
            )));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        if !(scale > T::zero()) {
            return Err(Error::Conditioning("solve: zero matrix".into()));
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .norm()
                        .partial_cmp(&a[j * n + col].norm())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            let pv = a[pivot * n + col].norm();
            if !(pv > tiny) {
                return Err(Error::Conditioning(format!(
                    "solve: singular system (pivot {col} magnitude {pv})"
                )));
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                x.swap(col, pivot);
            }
            let p = a[col * n + col];
            for i in (col + 1)..n {
                let factor = a[i * n + col] / p;
                if factor.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[i * n + j] -= factor * v;
                }
                let xv = x[col];
                x[i] -= factor * xv;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Ok(x)
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns `(eigenvalues, V)` with `self = V diag(λ) Vᴴ`,
    /// eigenvalues in descending order, eigenvectors as the columns of `V`.
    pub fn hermitian_eigen(&self) -> Result<(Vec<T>, Self)> {
        if !self.is_square() {
            return Err(Error::Size("eigen-decomposition of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = Self::identity(n);
        let norm = a.frobenius_norm();
        if norm.is_nan() || norm.is_infinite() {
            return Err(Error::Conditioning("non-finite matrix entries".into()));
        }
        let threshold = norm * T::epsilon() * T::lit(0.01);

        for _sweep in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum::<T>()
                .sqrt();
            if off <= threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let g = a[(p, q)];
                    let mag = g.norm();
                    if mag <= threshold / T::from_usize_lossy(n * n) {
                        continue;
                    }
                    let phase = g / mag;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (T::lit(2.0) * mag);
                    let t = if tau >= T::zero() {
                        T::one() / (tau + (T::one() + tau * tau).sqrt())
                    } else {
                        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    // J = [[c, s·e^{iφ}], [−s·e^{−iφ}, c]] on the (p, q) plane.
                    let jpp = Complex::new(c, T::zero());
                    let jpq = phase * s;
                    let jqp = -phase.conj() * s;
                    let jqq = Complex::new(c, T::zero());
                    // A ← A J
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * jpp + akq * jqp;
                        a[(k, q)] = akp * jpq + akq * jqq;
                    }
                    // A ← Jᴴ A
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                    }
                    a[(p, q)] = Complex::zero();
                    a[(q, p)] = Complex::zero();
                    a[(p, p)].im = T::zero();
                    a[(q, q)].im = T::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * jpp + vkq * jqp;
                        v[(k, q)] = vkp * jpq + vkq * jqq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(j, j)]
                .re
                .partial_cmp(&a[(i, i)].re)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Self::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok((values, vectors))
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// `aᴴ b`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    pub fn random_complex<R: Rng>(rng: &mut R) -> Complex<f64> {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    /// `B Bᴴ + ridge·I` for a random `n × (n + extra)` matrix `B`.
    pub fn random_pd<R: Rng>(rng: &mut R, n: usize, ridge: f64) -> CMatrix<f64> {
        let b = CMatrix::from_fn(n, n + 2, |_, _| random_complex(rng));
        let mut m = b.matmul(&b.conj_transpose());
        m.add_diagonal(ridge);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..8 {
            let m = random_pd(&mut rng, n, 0.1);
            let l = m.cholesky().unwrap();
            let err = l.matmul(&l.conj_transpose()).sub(&m).frobenius_norm();
            assert!(err <= 1e-12 * m.frobenius_norm(), "n={n} err={err}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = CMatrix::<f64>::diag(&[1.0, -1.0]);
        assert!(matches!(m.cholesky(), Err(Error::Conditioning(_))));
    }

    #[test]
    fn eigen_reconstructs_and_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..9 {
            let m = random_pd(&mut rng, n, 0.0);
            let (vals, v) = m.hermitian_eigen().unwrap();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            let rec = v.matmul(&CMatrix::diag(&vals)).matmul(&v.conj_transpose());
            assert!(rec.sub(&m).frobenius_norm() <= 1e-12 * m.frobenius_norm());
            let gram = v.conj_transpose().matmul(&v);
            assert!(gram.sub(&CMatrix::identity(n)).frobenius_norm() <= 1e-12);
        }
    }

    #[test]
    fn solve_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let a = CMatrix::from_fn(n, n, |_, _| random_complex(&mut rng));
            let x: Vec<_> = (0..n).map(|_| random_complex(&mut rng)).collect();
            let b = a.mat_vec(&x);
            let got = a.solve(&b).unwrap();
            for (g, e) in got.iter().zip(&x) {
                assert!((g - e).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn solve_flags_singular() {
        let v = vec![Complex::new(1.0, 0.5), Complex::new(-0.3, 2.0)];
        let a = CMatrix::<f64>::outer(&v);
        assert!(matches!(a.solve(&v), Err(Error::Conditioning(_))));
    }

    #[test]
    fn triangular_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_pd(&mut rng, 5, 0.5);
        let l = m.cholesky().unwrap();
        let b: Vec<_> = (0..5).map(|_| random_complex(&mut rng)).collect();
        let y = l.solve_lower(&b);
        let x = l.solve_lower_conj_transpose(&y);
        let back = m.mat_vec(&x);
        for (g, e) in back.iter().zip(&b) {
            assert!((g - e).norm() < 1e-10);
        }
    }
}
