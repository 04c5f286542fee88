//! Real dense matrices and LU with partial pivoting. Used for the MK x MK
//! linear system of the derivative coefficients, whose matrix and right-hand
//! side are real by construction.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "mul_vec: length mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.cols {
                    acc += self.data[i * self.cols + j] * x[j];
                }
                acc
            })
            .collect()
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm1(&self) -> T {
        let mut best = T::zero();
        for j in 0..self.cols {
            let mut s = T::zero();
            for i in 0..self.rows {
                s += self.get(i, j).abs();
            }
            best = best.max(s);
        }
        best
    }
}

/// LU decomposition with partial pivoting, `P A = L U` packed in place.
pub struct LuFactor<T> {
    lu: RMat<T>,
    piv: Vec<usize>,
}

/// Factors a square real matrix; fails on (numerically) singular input.
pub fn lu_factor<T: Real>(a: &RMat<T>) -> Result<LuFactor<T>> {
    if a.rows() != a.cols() {
        return Err(Error::Linalg("lu_factor: matrix not square".into()));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut piv = Vec::with_capacity(n);
    let scale = a.norm1().max(T::one());
    let tiny = T::epsilon() * scale * T::of(n as f64);
    for col in 0..n {
        // Pivot search
        let mut p = col;
        let mut best = lu.get(col, col).abs();
        for r in (col + 1)..n {
            let v = lu.get(r, col).abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if !(best > tiny) {
            return Err(Error::Linalg(format!(
                "lu_factor: singular or rank-deficient at column {col} (pivot {:.3e})",
                best.as_f64()
            )));
        }
        if p != col {
            for j in 0..n {
                let tmp = lu.get(col, j);
                lu.set(col, j, lu.get(p, j));
                lu.set(p, j, tmp);
            }
        }
        piv.push(p);
        let d = lu.get(col, col);
        for r in (col + 1)..n {
            let m = lu.get(r, col) / d;
            lu.set(r, col, m);
            if m != T::zero() {
                for j in (col + 1)..n {
                    let v = lu.get(r, j) - m * lu.get(col, j);
                    lu.set(r, j, v);
                }
            }
        }
    }
    Ok(LuFactor { lu, piv })
}

impl<T: Real> LuFactor<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "lu solve: length mismatch");
        let mut x = b.to_vec();
        for i in 0..n {
            x.swap(i, self.piv[i]);
        }
        // Forward (unit lower)
        for i in 1..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s;
        }
        // Backward (upper)
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }

    /// 1-norm condition number `||A||_1 * ||A^{-1}||_1`, with the inverse
    /// norm computed exactly from n unit-vector solves. Cheap at the MK
    /// dimensions this crate handles; exactness beats an estimator here.
    pub fn cond1(&self, a: &RMat<T>) -> T {
        let n = self.dim();
        let mut inv_norm = T::zero();
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.solve(&e);
            e[j] = T::zero();
            let mut s = T::zero();
            for v in &col {
                s += v.abs();
            }
            inv_norm = inv_norm.max(s);
        }
        // The true value is >= 1; rounding in the two norms can land a hair
        // below for well-conditioned systems.
        (a.norm1() * inv_norm).max(T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_recovers_known_solution() {
        let a = RMat::from_fn(4, 4, |i, j| {
            if i == j {
                4.0
            } else {
                ((i * 3 + j * 7) % 5) as f64 - 2.0
            }
        });
        let x_true = vec![1.0, -2.0, 0.5, 3.0];
        let b = a.mul_vec(&x_true);
        let f = lu_factor(&a).unwrap();
        let x = f.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert_relative_eq!(xi, ti, epsilon = 1e-12);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let mut a = RMat::zeros(2, 2);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let f = lu_factor(&a).unwrap();
        let x = f.solve(&[2.0, 3.0]);
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = RMat::from_fn(3, 3, |i, _| i as f64); // rank 1
        assert!(lu_factor(&a).is_err());
    }

    #[test]
    fn cond1_matches_hand_value() {
        // [[4,2],[1,3]]: ||A||_1 = 5, A^{-1} = [[0.3,-0.2],[-0.1,0.4]], ||A^{-1}||_1 = 0.6
        let mut a = RMat::zeros(2, 2);
        a.set(0, 0, 4.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 3.0);
        let f = lu_factor(&a).unwrap();
        assert_relative_eq!(f.cond1(&a), 3.0, epsilon = 1e-12);
    }
}
