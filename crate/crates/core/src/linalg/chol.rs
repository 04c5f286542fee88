//! Cholesky factorization of Hermitian positive-definite matrices, used for
//! every resolvent inversion in the fixed-point solver and the precoder.

use num_complex::Complex;

use super::Mat;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular factor `L` with `A = L L^H`.
pub struct CholeskyFactor<T> {
    l: Mat<T>,
}

/// Factors a Hermitian positive-definite matrix. Only the lower triangle of
/// `a` is read; a non-positive (or non-finite) pivot is reported as failure.
pub fn cholesky<T: Real>(a: &Mat<T>) -> Result<CholeskyFactor<T>> {
    if !a.is_square() {
        return Err(Error::Linalg("cholesky: matrix not square".into()));
    }
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Linalg(format!(
                "cholesky: non-positive pivot {:.3e} at index {j}",
                d.as_f64()
            )));
        }
        let ljj = d.sqrt();
        l.set(j, j, Complex::new(ljj, T::zero()));
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, Complex::new(s.re / ljj, s.im / ljj));
        }
    }
    Ok(CholeskyFactor { l })
}

impl<T: Real> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dim();
        assert_eq!(b.len(), n, "cholesky solve: length mismatch");
        let mut y = b.to_vec();
        // Forward: L y = b
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l.get(i, k) * y[k];
            }
            let d = self.l.get(i, i).re;
            y[i] = Complex::new(s.re / d, s.im / d);
        }
        // Backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l.get(k, i).conj() * y[k];
            }
            let d = self.l.get(i, i).re;
            y[i] = Complex::new(s.re / d, s.im / d);
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &Mat<T>) -> Mat<T> {
        let n = self.dim();
        assert_eq!(b.rows(), n, "cholesky solve: row mismatch");
        let mut out = Mat::zeros(n, b.cols());
        let mut col = vec![Complex::new(T::zero(), T::zero()); n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b.get(i, j);
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out.set(i, j, x[i]);
            }
        }
        out
    }

    /// `A^{-1}`, re-symmetrized so downstream trace arithmetic sees an
    /// exactly Hermitian matrix.
    pub fn inverse_hermitized(&self) -> Mat<T> {
        let n = self.dim();
        let mut inv = self.solve_mat(&Mat::identity(n));
        inv.hermitize();
        inv
    }

    /// Diagonal of `A^{-1}` without forming the full inverse:
    /// `[A^{-1}]_jj = ||L^{-1} e_j||^2` via forward solves only.
    pub fn inverse_diagonal(&self) -> Vec<T> {
        let n = self.dim();
        let mut diag = vec![T::zero(); n];
        let mut y = vec![Complex::new(T::zero(), T::zero()); n];
        for j in 0..n {
            for (r, v) in y.iter_mut().enumerate() {
                *v = Complex::new(if r == j { T::one() } else { T::zero() }, T::zero());
            }
            for i in j..n {
                let mut s = y[i];
                for k in j..i {
                    s = s - self.l.get(i, k) * y[k];
                }
                let d = self.l.get(i, i).re;
                y[i] = Complex::new(s.re / d, s.im / d);
            }
            let mut acc = T::zero();
            for v in &y[j..] {
                acc += v.norm_sqr();
            }
            diag[j] = acc;
        }
        diag
    }
}
