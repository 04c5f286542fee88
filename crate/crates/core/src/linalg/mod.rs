//! Small dense linear algebra over complex scalars.
//!
//! Everything here is sized for the desk-scale systems this crate simulates
//! (a few hundred rows at most), so the kernels are straightforward textbook
//! loops: deterministic, allocation-simple, and generic over [`Real`].

mod chol;
mod eigh;
mod lu;

pub use chol::{cholesky, CholeskyFactor};
pub use eigh::{eigh, sqrt_psd, Eigh};
pub use lu::{lu_factor, LuFactor, RMat};

use num_complex::Complex;

use crate::scalar::Real;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(T::one(), T::zero());
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

    /// Builds from real-valued rows (imaginary parts zero).
    pub fn from_real_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Self::from_fn(r, c, |i, j| Complex::new(rows[i][j], T::zero()))
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Complex<T>] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn herm(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add: shape mismatch");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = *a + *b;
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub: shape mismatch");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = *a - *b;
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = Complex::new(a.re * s, a.im * s);
        }
        out
    }

    /// `self += w * rhs` entry-wise.
    pub fn add_scaled_assign(&mut self, rhs: &Self, w: T) {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "add_scaled_assign: shape mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            a.re += b.re * w;
            a.im += b.im * w;
        }
    }

    /// Copies out the `nr x nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block: out of range");
        Self::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Adds `alpha * I` in place (square matrices only).
    pub fn add_diag(&mut self, alpha: T) {
        assert!(self.is_square(), "add_diag: square required");
        for i in 0..self.rows {
            let d = &mut self.data[i * self.cols + i];
            d.re += alpha;
        }
    }

    /// Matrix product `self * rhs` (ikj loop order).
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue; // dead-link blocks are exactly zero
                }
                let rrow = &rhs.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] = orow[j] + a * rrow[j];
                }
            }
        }
        out
    }

    /// Gram matrix `self^H * self`, exactly Hermitian by construction
    /// (lower triangle accumulated, upper mirrored).
    pub fn gram(&self) -> Self {
        let c = self.cols;
        let mut out = Self::zeros(c, c);
        for k in 0..self.rows {
            let row = self.row(k);
            for i in 0..c {
                let a = row[i].conj();
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let dst = &mut out.data[i * c..i * c + i + 1];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d = *d + a * *b;
                }
            }
        }
        for i in 0..c {
            out.data[i * c + i].im = T::zero();
            for j in 0..i {
                out.data[j * c + i] = out.data[i * c + j].conj();
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, x.len(), "mul_vec: length mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (a, b) in self.row(i).iter().zip(x) {
                    acc = acc + *a * *b;
                }
                acc
            })
            .collect()
    }

    pub fn trace(&self) -> Complex<T> {
        assert!(self.is_square(), "trace: square required");
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.rows {
            acc = acc + self.data[i * self.cols + i];
        }
        acc
    }

    /// `tr(self * rhs)` without forming the product: sum_{i,j} a_ij b_ji.
    pub fn trace_prod(&self, rhs: &Self) -> Complex<T> {
        assert_eq!(self.cols, rhs.rows, "trace_prod: inner dimension mismatch");
        assert_eq!(self.rows, rhs.cols, "trace_prod: outer dimension mismatch");
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc = acc + self.get(i, j) * rhs.get(j, i);
            }
        }
        acc
    }

    pub fn frob_norm(&self) -> T {
        let mut acc = T::zero();
        for a in &self.data {
            acc += a.norm_sqr();
        }
        acc.sqrt()
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for a in &self.data {
            m = m.max(a.re.abs()).max(a.im.abs());
        }
        m
    }

    /// Largest entry-wise deviation from Hermitian symmetry,
    /// `max_ij |a_ij - conj(a_ji)|`.
    pub fn herm_defect(&self) -> T {
        assert!(self.is_square(), "herm_defect: square required");
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self.get(i, j) - self.get(j, i).conj();
                m = m.max(d.re.abs()).max(d.im.abs());
            }
        }
        m
    }

    /// Replaces the matrix by its Hermitian part `(A + A^H)/2`.
    pub fn hermitize(&mut self) {
        assert!(self.is_square(), "hermitize: square required");
        let half = T::of(0.5);
        for i in 0..self.rows {
            let dii = self.data[i * self.cols + i];
            self.data[i * self.cols + i] = Complex::new(dii.re, T::zero());
            for j in (i + 1)..self.cols {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let m = Complex::new((a.re + b.re) * half, (a.im - b.im) * half);
                self.set(i, j, m);
                self.set(j, i, m.conj());
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|a| a.re == T::zero() && a.im == T::zero())
    }
}
