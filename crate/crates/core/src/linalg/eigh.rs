//! Hermitian eigendecomposition via cyclic Jacobi rotations. Used for
//! validating correlation matrices, forming their square roots for channel
//! synthesis, and the eigenvalue route of the homogeneous reductions.

use num_complex::Complex;

use super::Mat;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigendecomposition `A = V diag(values) V^H`; eigenvalues ascending,
/// eigenvectors in the corresponding columns of `vectors`.
pub struct Eigh<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

const MAX_SWEEPS: usize = 64;

/// Diagonalizes a Hermitian matrix. The input is symmetrized first, so
/// entry-level Hermiticity noise up to the caller's validation tolerance is
/// absorbed rather than amplified.
pub fn eigh<T: Real>(a: &Mat<T>) -> Result<Eigh<T>> {
    if !a.is_square() {
        return Err(Error::Linalg("eigh: matrix not square".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    m.hermitize();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return Ok(Eigh {
            values: (0..n).map(|i| m.get(i, i).re).collect(),
            vectors: v,
        });
    }
    let frob = m.frob_norm().max(T::min_positive_value());
    let stop = frob * T::epsilon() * T::of(n as f64);
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let abs = apq.norm();
                if !(abs > frob * T::epsilon() * T::of(0.01)) {
                    continue;
                }
                // Phase u makes the 2x2 block real; then a standard Jacobi
                // rotation annihilates it. Combined unitary J acts on
                // rows/columns p and q:
                //   J_pp = c*u, J_qp = -s, J_pq = s*u, J_qq = c.
                let u = Complex::new(apq.re / abs, apq.im / abs);
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (abs + abs);
                let t = {
                    let sign = if tau >= T::zero() { T::one() } else { -T::one() };
                    sign / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;

                // Column update: col_p <- c*u*col_p - s*col_q,
                //                col_q <- s*u*col_p + c*col_q.
                for r in 0..n {
                    let mp = m.get(r, p);
                    let mq = m.get(r, q);
                    m.set(r, p, u * mp.scale(c) - mq.scale(s));
                    m.set(r, q, u * mp.scale(s) + mq.scale(c));
                }
                // Row update with conjugate coefficients.
                let uc = u.conj();
                for r in 0..n {
                    let mp = m.get(p, r);
                    let mq = m.get(q, r);
                    m.set(p, r, uc * mp.scale(c) - mq.scale(s));
                    m.set(q, r, uc * mp.scale(s) + mq.scale(c));
                }
                // Keep the accumulated unitary in sync.
                for r in 0..n {
                    let vp = v.get(r, p);
                    let vq = v.get(r, q);
                    v.set(r, p, u * vp.scale(c) - vq.scale(s));
                    v.set(r, q, u * vp.scale(s) + vq.scale(c));
                }
                // Clean the annihilated pair to exact zero.
                m.set(p, q, Complex::new(T::zero(), T::zero()));
                m.set(q, p, Complex::new(T::zero(), T::zero()));
            }
        }
    }
    let mut off = T::zero();
    for p in 0..n {
        for q in (p + 1)..n {
            off += m.get(p, q).norm_sqr();
        }
    }
    if off.sqrt() > stop * T::of(64.0) {
        return Err(Error::Convergence {
            context: "eigh jacobi sweeps".into(),
            iterations: MAX_SWEEPS,
            residual: off.sqrt().as_f64(),
        });
    }

    // Sort ascending, permuting eigenvector columns alongside.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        m.get(i, i)
            .re
            .partial_cmp(&m.get(j, j).re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<T> = idx.iter().map(|&i| m.get(i, i).re).collect();
    let vectors = Mat::from_fn(n, n, |r, cidx| v.get(r, idx[cidx]));
    Ok(Eigh { values, vectors })
}

/// Hermitian square root of a nonnegative-definite matrix. Eigenvalues in
/// `[-neg_tol, 0)` are treated as rounding residue and clamped to zero; a
/// more negative eigenvalue is an error.
pub fn sqrt_psd<T: Real>(a: &Mat<T>, neg_tol: T) -> Result<Mat<T>> {
    let dec = eigh(a)?;
    let n = a.rows();
    let mut roots = Vec::with_capacity(n);
    for &w in &dec.values {
        if w < -neg_tol {
            return Err(Error::Linalg(format!(
                "sqrt_psd: matrix indefinite (eigenvalue {:.3e})",
                w.as_f64()
            )));
        }
        roots.push(w.max(T::zero()).sqrt());
    }
    // V diag(sqrt(w)) V^H
    let mut scaled = dec.vectors.clone();
    for r in 0..n {
        for c in 0..n {
            let v = scaled.get(r, c);
            scaled.set(r, c, v.scale(roots[c]));
        }
    }
    let mut out = scaled.matmul(&dec.vectors.herm());
    out.hermitize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn two_by_two_hermitian_exact_eigenvalues() {
        // [[2, 1-i], [1+i, 3]] has eigenvalues 1 and 4 (char. poly
        // x^2 - 5x + 4).
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (0, 1) => c(1.0, -1.0),
            (1, 0) => c(1.0, 1.0),
            _ => c(3.0, 0.0),
        });
        let dec = eigh(&a).unwrap();
        assert_relative_eq!(dec.values[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(dec.values[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_and_unitarity() {
        let b = Mat::from_fn(7, 7, |i, j| {
            c(
                (((i * 13 + j * 5) % 17) as f64) / 17.0 - 0.5,
                (((i * 3 + j * 11) % 13) as f64) / 13.0 - 0.5,
            )
        });
        let mut a = b.herm().matmul(&b);
        a.hermitize();
        let dec = eigh(&a).unwrap();
        // V V^H = I
        let vvh = dec.vectors.matmul(&dec.vectors.herm());
        assert!(vvh.sub(&Mat::identity(7)).max_abs() < 1e-12);
        // V diag(w) V^H = A
        let mut scaled = dec.vectors.clone();
        for r in 0..7 {
            for cidx in 0..7 {
                let v = scaled.get(r, cidx);
                scaled.set(r, cidx, v.scale(dec.values[cidx]));
            }
        }
        let recon = scaled.matmul(&dec.vectors.herm());
        assert!(recon.sub(&a).max_abs() < 1e-11 * a.max_abs().max(1.0));
    }

    #[test]
    fn exp_correlation_3x3_frozen_spectrum() {
        // Eigenvalues of [[1,.5,.25],[.5,1,.5],[.25,.5,1]] (independent
        // numerical oracle, frozen).
        let rows = vec![
            vec![1.0, 0.5, 0.25],
            vec![0.5, 1.0, 0.5],
            vec![0.25, 0.5, 1.0],
        ];
        let a = Mat::from_real_rows(&rows);
        let dec = eigh(&a).unwrap();
        let expect = [0.406929669182746, 0.75, 1.843070330817254];
        for (got, want) in dec.values.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let b = Mat::from_fn(5, 5, |i, j| {
            c(
                (((i * 7 + j * 3) % 11) as f64) / 11.0,
                (((i + 2 * j) % 5) as f64) / 5.0 - 0.4,
            )
        });
        let mut a = b.herm().matmul(&b);
        a.hermitize();
        let r = sqrt_psd(&a, 1e-10).unwrap();
        let sq = r.matmul(&r);
        assert!(sq.sub(&a).max_abs() < 1e-11 * a.max_abs().max(1.0));
        assert_eq!(r.herm_defect(), 0.0);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let mut a = Mat::<f64>::identity(3);
        a.set(1, 1, c(-0.5, 0.0));
        assert!(sqrt_psd(&a, 1e-10).is_err());
    }

    #[test]
    fn zero_matrix_has_zero_sqrt() {
        let z = Mat::<f64>::zeros(4, 4);
        let r = sqrt_psd(&z, 1e-10).unwrap();
        assert!(r.is_zero());
    }
}
