//! Coupled fixed point for the large-system resolvent and its companion
//! linear system.
//!
//! For a scenario with M base stations and K users, the deterministic
//! equivalent of the regularized channel Gram resolvent is described by
//! per-link scalars `e_{k,i}` and per-BS Hermitian matrices `Psi_i`
//! satisfying
//!
//! ```text
//! Psi_i   = ( (1/N_i) sum_k T_{k,i} / (1 + sum_m e_{k,m}) + alpha I )^{-1}
//! e_{k,i} = (1/N_i) tr(T_{k,i} Psi_i)
//! ```
//!
//! [`solve_fixed_point`] resolves this system by Picard iteration.
//! [`solve_dotc`] then solves the MK-dimensional linear system for the
//! companion coefficients `c'_{k,i}` that enter the regularization
//! sensitivity terms of the SINR formula. [`det_stieltjes`] exposes the
//! weighted trace of the deterministic resolvent, which approximates
//! `(1/N) tr(Q (Hhat^H Hhat + alpha I)^{-1})` for block-diagonal weights Q.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, lu_factor, Mat, RMat};
use crate::scalar::Real;
use crate::scenario::Scenario;

/// Iteration cap for the Picard sweep.
const MAX_ITERS: usize = 2000;

/// Converged solution of the `{e_{k,i}, Psi_i}` fixed point at a given
/// regularization parameter.
#[derive(Debug, Clone)]
pub struct FixedPointSolution<T> {
    /// Regularization parameter the system was solved at.
    pub alpha: T,
    /// Link coefficients `e_{k,i}`, laid out as `e[k * M + i]`.
    pub e: Vec<T>,
    /// Per-BS deterministic resolvent blocks `Psi_i` (Hermitian positive
    /// definite, `N_i` by `N_i`).
    pub psi: Vec<Mat<T>>,
    /// Picard sweeps executed.
    pub iterations: usize,
    /// Final max relative change of `e` across one sweep.
    pub residual: T,
}

impl<T: Real> FixedPointSolution<T> {
    /// Number of base stations.
    pub fn m(&self) -> usize {
        self.psi.len()
    }

    /// Number of users.
    pub fn num_users(&self) -> usize {
        if self.psi.is_empty() {
            0
        } else {
            self.e.len() / self.psi.len()
        }
    }

    /// Link coefficient `e_{k,i}`.
    pub fn e_at(&self, k: usize, i: usize) -> T {
        self.e[k * self.psi.len() + i]
    }
}

/// Solve the coupled `{e_{k,i}, Psi_i}` system by accelerated Picard
/// iteration.
///
/// Starts from `e_{k,i} = 1`, recomputes every `Psi_i` by Hermitian
/// factorization each sweep, and stops when the max relative change of `e`
/// drops below 1e-13 (widened for `f32`). Plain Picard contracts very
/// slowly for small `alpha` (rate `1 - O(sqrt(alpha))`), so each sweep is
/// followed by a secant (Anderson-1) extrapolation on the residual
/// sequence, falling back to the plain update whenever the extrapolated
/// point leaves the nonnegative orthant. The stored solution satisfies
/// `e_{k,i} = (1/N_i) tr(T_{k,i} Psi_i)` exactly: `e` holds the refresh
/// computed from the stored `Psi` matrices.
pub fn solve_fixed_point<T: Real>(s: &Scenario<T>, alpha: T) -> Result<FixedPointSolution<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::Scenario(format!(
            "regularization parameter must be positive and finite, got {alpha}"
        )));
    }
    let m = s.m();
    let kk = s.k();

    if kk == 0 {
        // Empty user sum: the resolvent is exactly (1/alpha) I.
        let psi = (0..m)
            .map(|i| Mat::identity(s.n()[i]).scale(T::one() / alpha))
            .collect();
        return Ok(FixedPointSolution {
            alpha,
            e: Vec::new(),
            psi,
            iterations: 0,
            residual: T::zero(),
        });
    }

    let tol = T::tol_floor(1e-13, 64.0);
    let mut e = vec![T::one(); kk * m];
    let mut prev_point: Vec<T> = Vec::new();
    let mut prev_map: Vec<T> = Vec::new();
    let mut last_residual = T::infinity();

    for iter in 1..=MAX_ITERS {
        let d: Vec<T> = (0..kk)
            .map(|k| {
                let sum = (0..m).fold(T::zero(), |acc, i| acc + e[k * m + i]);
                T::one() / (T::one() + sum)
            })
            .collect();

        let mut psi: Vec<Mat<T>> = Vec::with_capacity(m);
        for i in 0..m {
            let n_i = s.n()[i];
            let inv_n = T::one() / T::of(n_i as f64);
            let mut a = Mat::zeros(n_i, n_i);
            for k in 0..kk {
                let t = s.corr(k, i);
                if !t.is_zero() {
                    a.add_scaled_assign(t, d[k] * inv_n);
                }
            }
            a.add_diag(alpha);
            psi.push(cholesky(&a)?.inverse_hermitized());
        }

        let mut e_next = vec![T::zero(); kk * m];
        for k in 0..kk {
            for i in 0..m {
                let t = s.corr(k, i);
                if !t.is_zero() {
                    let tr = t.trace_prod(&psi[i]).re;
                    e_next[k * m + i] = (tr / T::of(s.n()[i] as f64)).max(T::zero());
                }
            }
        }

        let mut residual = T::zero();
        for (new, old) in e_next.iter().zip(&e) {
            residual = residual.max((*new - *old).abs() / (T::one() + new.abs()));
        }
        if residual <= tol {
            return Ok(FixedPointSolution {
                alpha,
                e: e_next,
                psi,
                iterations: iter,
                residual,
            });
        }
        last_residual = residual;

        // Secant extrapolation over the last two (point, map) pairs; the
        // map is monotone with a nonnegative fixed point, so any candidate
        // that exits the orthant is discarded in favor of the plain sweep.
        let mut next = e_next.clone();
        if !prev_point.is_empty() {
            let mut num = T::zero();
            let mut den = T::zero();
            for idx in 0..next.len() {
                let r = e_next[idx] - e[idx];
                let dr = r - (prev_map[idx] - prev_point[idx]);
                num += r * dr;
                den += dr * dr;
            }
            if den > T::zero() {
                let theta = num / den;
                let mut ok = true;
                for idx in 0..next.len() {
                    let v = e_next[idx] - theta * (e_next[idx] - prev_map[idx]);
                    if !v.is_finite() || v < T::zero() {
                        ok = false;
                        break;
                    }
                    next[idx] = v;
                }
                if !ok {
                    next.copy_from_slice(&e_next);
                }
            }
        }
        prev_point = e;
        prev_map = e_next;
        e = next;
    }

    Err(Error::Convergence {
        context: "resolvent fixed point".into(),
        iterations: MAX_ITERS,
        residual: last_residual.as_f64(),
    })
}

/// Trace functionals of a converged fixed point that the SINR formula and
/// the companion linear system consume.
///
/// Every cached value is a trace of a product of nonnegative-definite
/// Hermitian matrices, hence real and nonnegative; imaginary residue is
/// checked in debug builds and tiny negative rounding is clamped to zero.
/// `tr(Psi_i T_{k,i} Psi_i)` coincides with `tr(T_{k,i} Psi_i^2)` by cyclic
/// invariance and is served by [`DerivedTraces::t_psi2`].
#[derive(Debug, Clone)]
pub struct DerivedTraces<T> {
    m: usize,
    k: usize,
    t_psi: Vec<T>,
    t_psi2: Vec<T>,
    t_pair: Vec<T>,
    psi_tr: Vec<T>,
    psi2_tr: Vec<T>,
}

fn real_nonneg<T: Real>(v: Complex<T>) -> T {
    debug_assert!(
        v.im.abs() <= T::tol_floor(1e-10, 512.0) * (T::one() + v.re.abs()),
        "trace of Hermitian product has imaginary residue {:?}",
        v
    );
    v.re.max(T::zero())
}

impl<T: Real> DerivedTraces<T> {
    /// Evaluate all trace families for `fp` on scenario `s`.
    pub fn compute(s: &Scenario<T>, fp: &FixedPointSolution<T>) -> Self {
        let m = s.m();
        let kk = s.k();
        let mut t_psi = vec![T::zero(); kk * m];
        let mut t_psi2 = vec![T::zero(); kk * m];
        let mut t_pair = vec![T::zero(); m * kk * kk];
        let mut psi_tr = vec![T::zero(); m];
        let mut psi2_tr = vec![T::zero(); m];

        for i in 0..m {
            let psi = &fp.psi[i];
            psi_tr[i] = real_nonneg(psi.trace());
            psi2_tr[i] = real_nonneg(psi.trace_prod(psi));
            // Products T_{k,i} Psi_i are shared by the quadratic families.
            let prods: Vec<Option<Mat<T>>> = (0..kk)
                .map(|k| {
                    let t = s.corr(k, i);
                    (!t.is_zero()).then(|| t.matmul(psi))
                })
                .collect();
            for k in 0..kk {
                let Some(tk) = &prods[k] else { continue };
                t_psi[k * m + i] = real_nonneg(tk.trace());
                t_psi2[k * m + i] = real_nonneg(tk.trace_prod(psi));
                for l in 0..=k {
                    let Some(tl) = &prods[l] else { continue };
                    let v = real_nonneg(tk.trace_prod(tl));
                    t_pair[(i * kk + k) * kk + l] = v;
                    t_pair[(i * kk + l) * kk + k] = v;
                }
            }
        }
        Self {
            m,
            k: kk,
            t_psi,
            t_psi2,
            t_pair,
            psi_tr,
            psi2_tr,
        }
    }

    /// `tr(T_{k,i} Psi_i)`.
    pub fn t_psi(&self, k: usize, i: usize) -> T {
        self.t_psi[k * self.m + i]
    }

    /// `tr(T_{k,i} Psi_i^2)`.
    pub fn t_psi2(&self, k: usize, i: usize) -> T {
        self.t_psi2[k * self.m + i]
    }

    /// `tr(T_{k,i} Psi_i T_{l,i} Psi_i)`, symmetric in `k` and `l`.
    pub fn t_pair(&self, i: usize, k: usize, l: usize) -> T {
        self.t_pair[(i * self.k + k) * self.k + l]
    }

    /// `tr(Psi_i)`.
    pub fn psi_tr(&self, i: usize) -> T {
        self.psi_tr[i]
    }

    /// `tr(Psi_i^2)`.
    pub fn psi2_tr(&self, i: usize) -> T {
        self.psi2_tr[i]
    }
}

/// Solution of the companion linear system for the coefficients `c'_{k,i}`.
#[derive(Debug, Clone)]
pub struct DotCSolution<T> {
    m: usize,
    /// Coefficients `c'_{k,i}`, laid out as `dotc[k * M + i]`.
    pub dotc: Vec<T>,
    /// Exact 1-norm condition number of the system matrix.
    pub theta_cond: T,
}

impl<T: Real> DotCSolution<T> {
    /// Coefficient `c'_{k,i}`.
    pub fn dotc_at(&self, k: usize, i: usize) -> T {
        self.dotc[k * self.m + i]
    }
}

/// Solve the MK-dimensional linear system `Theta vec(C') = vec(Gamma)` for
/// the companion coefficients of a converged fixed point.
///
/// Row `(i,k)` and column `(j,l)` of `Theta` are flattened as `i*K + k` and
/// `j*K + l` (column-major vec of the K by M coefficient matrix); with
/// `d_k = 1/(1 + sum_m e_{k,m})` the entries are
///
/// ```text
/// Theta[(i,k),(j,l)] = [r == c] - d_k^2 tr(T_{k,j} Psi_j T_{l,j} Psi_j) / (N_i N_j)
/// Gamma[(i,k)]       = -(d_k^2 / N_i) sum_j tr(T_{k,j} Psi_j^2) / N_j
/// ```
///
/// The system is solved by dense LU with partial pivoting; the defining
/// residual must satisfy `||Theta x - Gamma|| <= 1e-8 ||Gamma||`.
pub fn solve_dotc<T: Real>(s: &Scenario<T>, fp: &FixedPointSolution<T>) -> Result<DotCSolution<T>> {
    let m = s.m();
    let kk = s.k();
    if fp.psi.len() != m || fp.e.len() != kk * m {
        return Err(Error::Dimension(format!(
            "fixed-point solution shape ({} blocks, {} coefficients) does not match scenario (M={m}, K={kk})",
            fp.psi.len(),
            fp.e.len()
        )));
    }
    if kk == 0 {
        return Ok(DotCSolution {
            m,
            dotc: Vec::new(),
            theta_cond: T::one(),
        });
    }

    let traces = DerivedTraces::compute(s, fp);
    let d2: Vec<T> = (0..kk)
        .map(|k| {
            let sum = (0..m).fold(T::zero(), |acc, i| acc + fp.e[k * m + i]);
            let d = T::one() / (T::one() + sum);
            d * d
        })
        .collect();
    let n_of = |i: usize| T::of(s.n()[i] as f64);

    let dim = m * kk;
    let theta = RMat::from_fn(dim, dim, |r, c| {
        let (i, k) = (r / kk, r % kk);
        let (j, l) = (c / kk, c % kk);
        let coupling = -d2[k] * traces.t_pair(j, k, l) / (n_of(i) * n_of(j));
        if r == c {
            T::one() + coupling
        } else {
            coupling
        }
    });
    let gamma: Vec<T> = (0..dim)
        .map(|r| {
            let (i, k) = (r / kk, r % kk);
            let sum = (0..m).fold(T::zero(), |acc, j| acc + traces.t_psi2(k, j) / n_of(j));
            -d2[k] / n_of(i) * sum
        })
        .collect();

    let factor = lu_factor(&theta)?;
    let x = factor.solve(&gamma);

    let norm2 = |v: &[T]| v.iter().fold(T::zero(), |acc, t| acc + *t * *t).sqrt();
    let diff: Vec<T> = theta
        .mul_vec(&x)
        .iter()
        .zip(&gamma)
        .map(|(a, b)| *a - *b)
        .collect();
    let tol = T::tol_floor(1e-8, 1024.0);
    if norm2(&diff) > tol * norm2(&gamma) {
        return Err(Error::Linalg(format!(
            "companion system residual {} exceeds {} of the right-hand side",
            norm2(&diff).as_f64(),
            tol.as_f64()
        )));
    }

    let mut dotc = vec![T::zero(); kk * m];
    for i in 0..m {
        for k in 0..kk {
            dotc[k * m + i] = x[i * kk + k];
        }
    }
    Ok(DotCSolution {
        m,
        dotc,
        theta_cond: factor.cond1(&theta),
    })
}

/// Weighted trace of the deterministic resolvent,
/// `(1/N) tr(Q diag(Psi_1, ..., Psi_M))`, approximating the empirical
/// `(1/N) tr(Q (Hhat^H Hhat + alpha I)^{-1})` for large N.
///
/// `q` must be Hermitian, N by N, and block-diagonal conformal with the
/// per-BS antenna counts; rejects anything else.
pub fn det_stieltjes<T: Real>(s: &Scenario<T>, q: &Mat<T>, alpha: T) -> Result<T> {
    let n = s.n_total();
    if !q.is_square() || q.rows() != n {
        return Err(Error::Dimension(format!(
            "weight matrix is {}x{}, scenario has {n} antennas",
            q.rows(),
            q.cols()
        )));
    }
    let scale = q.max_abs().max(T::one());
    let tol = T::tol_floor(1e-12, 16.0) * scale;
    if q.herm_defect() > tol {
        return Err(Error::Unsupported(
            "weight matrix must be Hermitian".into(),
        ));
    }
    let m = s.m();
    for r in 0..n {
        let bi = (0..m).position(|i| r < s.offset(i + 1)).unwrap();
        for c in 0..n {
            let bj = (0..m).position(|i| c < s.offset(i + 1)).unwrap();
            if bi != bj && q.get(r, c).norm_sqr().sqrt() > tol {
                return Err(Error::Unsupported(
                    "weight matrix must be block-diagonal conformal with the per-BS antenna counts"
                        .into(),
                ));
            }
        }
    }

    let fp = solve_fixed_point(s, alpha)?;
    let mut acc = T::zero();
    for i in 0..m {
        let n_i = s.n()[i];
        let block = q.block(s.offset(i), s.offset(i), n_i, n_i);
        acc += block.trace_prod(&fp.psi[i]).re;
    }
    Ok(acc / T::of(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, sqrt_psd};
    use crate::scenario::exp_correlation;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use rayon::prelude::*;

    fn scen_identity(m: usize, n: usize, k: usize) -> Scenario<f64> {
        let corr = (0..k * m).map(|_| Mat::identity(n)).collect();
        Scenario::new(vec![n; m], k, 10.0, corr, vec![0.0; k * m]).unwrap()
    }

    /// Two BSs with different antenna counts, varied per-link correlation
    /// and path gain, plus one dead link.
    fn scen_hetero() -> Scenario<f64> {
        let n = [3usize, 5];
        let k = 3;
        let mut corr = Vec::new();
        for ku in 0..k {
            for (i, &ni) in n.iter().enumerate() {
                if ku == 2 && i == 0 {
                    corr.push(Mat::zeros(ni, ni));
                } else {
                    let r = 0.1 + 0.12 * (ku * 2 + i) as f64;
                    let gain = 0.6 + 0.3 * (ku + i) as f64;
                    corr.push(exp_correlation(ni, r, gain).unwrap());
                }
            }
        }
        Scenario::new(n.to_vec(), k, 10.0, corr, vec![0.1; k * 2]).unwrap()
    }

    #[test]
    fn no_users_resolvent_is_scaled_identity() {
        let s = Scenario::<f64>::new(vec![3, 5], 0, 1.0, vec![], vec![]).unwrap();
        let fp = solve_fixed_point(&s, 0.25).unwrap();
        assert!(fp.e.is_empty());
        assert_eq!(fp.iterations, 0);
        for (i, psi) in fp.psi.iter().enumerate() {
            assert_eq!(psi.rows(), s.n()[i]);
            for r in 0..psi.rows() {
                for c in 0..psi.cols() {
                    let want = if r == c { 4.0 } else { 0.0 };
                    assert_relative_eq!(psi.get(r, c).re, want, epsilon = 1e-14);
                    assert_relative_eq!(psi.get(r, c).im, 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn symmetric_identity_scenario_matches_quadratic_root() {
        // With M=2, N_i=4, K=4, T=I, alpha=1 the system reduces to the
        // scalar quadratic alpha*M*e^2 + (alpha + K/N - M)e - 1 = 0 whose
        // positive root is 1/sqrt(2).
        let s = scen_identity(2, 4, 4);
        let fp = solve_fixed_point(&s, 1.0).unwrap();
        let want = 0.5f64.sqrt();
        for k in 0..4 {
            for i in 0..2 {
                assert_relative_eq!(fp.e_at(k, i), want, epsilon = 1e-9);
            }
        }
        for psi in &fp.psi {
            for r in 0..psi.rows() {
                assert_relative_eq!(psi.get(r, r).re, want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn correlated_scenario_matches_scalar_picard_oracle() {
        // Every link shares one correlation matrix, so the system reduces
        // to a scalar iteration over the eigenvalues of that matrix. Run
        // that reduction independently (always damped, 1e-14 tolerance,
        // different start) and compare.
        let n = 4;
        let k = 3;
        let m = 2;
        let c = exp_correlation(n, 0.5, 1.0).unwrap();
        let corr = (0..k * m).map(|_| c.clone()).collect();
        let s = Scenario::new(vec![n; m], k, 10.0, corr, vec![0.0; k * m]).unwrap();
        let alpha = 0.1;

        let lam = eigh(&c).unwrap().values;
        let mut e = 0.5f64;
        for _ in 0..10_000 {
            let d = 1.0 / (1.0 + m as f64 * e);
            let refresh = lam
                .iter()
                .map(|l| l / (k as f64 * d / n as f64 * l + alpha))
                .sum::<f64>()
                / n as f64;
            let delta = refresh - e;
            e += 0.5 * delta;
            if delta.abs() < 1e-14 {
                break;
            }
        }

        let fp = solve_fixed_point(&s, alpha).unwrap();
        for ku in 0..k {
            for i in 0..m {
                assert_relative_eq!(fp.e_at(ku, i), e, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let s = scen_identity(1, 3, 2);
        assert!(solve_fixed_point(&s, 0.0).is_err());
        assert!(solve_fixed_point(&s, -1.0).is_err());
        assert!(solve_fixed_point(&s, f64::NAN).is_err());
    }

    #[test]
    fn stored_solution_is_self_consistent() {
        let s = scen_hetero();
        let fp = solve_fixed_point(&s, 0.3).unwrap();
        assert!(fp.residual <= 1e-10);
        assert!(fp.iterations < MAX_ITERS);
        for k in 0..s.k() {
            for i in 0..s.m() {
                let t = s.corr(k, i);
                let refresh = if t.is_zero() {
                    0.0
                } else {
                    t.trace_prod(&fp.psi[i]).re / s.n()[i] as f64
                };
                let e = fp.e_at(k, i);
                assert!((e - refresh).abs() <= 1e-14 * (1.0 + e));
                assert!(e >= 0.0);
            }
        }
        // Dead link contributes a zero coefficient.
        assert_eq!(fp.e_at(2, 0), 0.0);
    }

    #[test]
    fn e_is_nonincreasing_in_alpha() {
        let s = scen_hetero();
        let grid = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0];
        let mut prev: Option<Vec<f64>> = None;
        for &alpha in &grid {
            let fp = solve_fixed_point(&s, alpha).unwrap();
            if let Some(p) = &prev {
                for (now, before) in fp.e.iter().zip(p) {
                    assert!(
                        *now <= before + 1e-10,
                        "e increased from {before} to {now} as alpha grew"
                    );
                }
            }
            prev = Some(fp.e.clone());
        }
    }

    #[test]
    fn derived_traces_match_direct_evaluation() {
        let s = scen_hetero();
        let fp = solve_fixed_point(&s, 0.3).unwrap();
        let tr = DerivedTraces::compute(&s, &fp);
        for i in 0..s.m() {
            let psi = &fp.psi[i];
            assert_relative_eq!(tr.psi_tr(i), psi.trace().re, epsilon = 1e-12);
            assert_relative_eq!(
                tr.psi2_tr(i),
                psi.matmul(psi).trace().re,
                epsilon = 1e-12
            );
            for k in 0..s.k() {
                let tk = s.corr(k, i).matmul(psi);
                assert_relative_eq!(tr.t_psi(k, i), tk.trace().re, epsilon = 1e-12);
                assert_relative_eq!(
                    tr.t_psi2(k, i),
                    tk.matmul(psi).trace().re,
                    epsilon = 1e-12
                );
                for l in 0..s.k() {
                    let tl = s.corr(l, i).matmul(psi);
                    let direct = tk.matmul(&tl).trace().re;
                    assert_relative_eq!(tr.t_pair(i, k, l), direct, epsilon = 1e-12);
                    assert!(tr.t_pair(i, k, l) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn dotc_scalar_case_two_routes_agree() {
        // K=1, M=1 collapses the linear system to a scalar division.
        let s = scen_identity(1, 4, 1);
        let fp = solve_fixed_point(&s, 0.7).unwrap();
        let tr = DerivedTraces::compute(&s, &fp);
        let n = 4.0;
        let d = 1.0 / (1.0 + fp.e_at(0, 0));
        let theta = 1.0 - d * d * tr.t_pair(0, 0, 0) / (n * n);
        let gamma = -d * d * tr.t_psi2(0, 0) / (n * n);
        let direct = gamma / theta;

        let dc = solve_dotc(&s, &fp).unwrap();
        assert_relative_eq!(dc.dotc_at(0, 0), direct, epsilon = 1e-12);
        assert!(dc.theta_cond >= 1.0);
    }

    #[test]
    fn homogeneous_dotc_is_user_symmetric() {
        let s = scen_identity(2, 8, 8);
        let fp = solve_fixed_point(&s, 0.4).unwrap();
        let dc = solve_dotc(&s, &fp).unwrap();
        let lo = dc.dotc.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = dc.dotc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1e-10, "spread {} too large", hi - lo);
        assert!(hi < 0.0, "companion coefficients should be negative");
    }

    #[test]
    fn dotc_satisfies_defining_system() {
        // Rebuild Theta and Gamma from their printed two-branch form and
        // check the returned coefficients solve the system.
        let s = scen_hetero();
        let fp = solve_fixed_point(&s, 0.3).unwrap();
        let dc = solve_dotc(&s, &fp).unwrap();
        let tr = DerivedTraces::compute(&s, &fp);
        let (m, kk) = (s.m(), s.k());
        let dim = m * kk;
        let nf = |i: usize| s.n()[i] as f64;
        let d2 = |k: usize| {
            let sum: f64 = (0..m).map(|i| fp.e_at(k, i)).sum();
            (1.0 / (1.0 + sum)).powi(2)
        };

        let mut x = vec![0.0; dim];
        for i in 0..m {
            for k in 0..kk {
                x[i * kk + k] = dc.dotc_at(k, i);
            }
        }
        let mut resid2 = 0.0;
        let mut rhs2 = 0.0;
        for r in 0..dim {
            let (i, k) = (r / kk, r % kk);
            let mut lhs = 0.0;
            for c in 0..dim {
                let (j, l) = (c / kk, c % kk);
                let entry = if i == j && k == l {
                    1.0 - d2(k) * tr.t_pair(i, k, k) / (nf(i) * nf(i))
                } else {
                    -d2(k) * tr.t_pair(j, k, l) / (nf(i) * nf(j))
                };
                lhs += entry * x[c];
            }
            let gamma: f64 =
                -(d2(k) / nf(i)) * (0..m).map(|j| tr.t_psi2(k, j) / nf(j)).sum::<f64>();
            resid2 += (lhs - gamma).powi(2);
            rhs2 += gamma * gamma;
        }
        assert!(resid2.sqrt() <= 1e-8 * rhs2.sqrt());
        assert!(dc.theta_cond.is_finite() && dc.theta_cond >= 1.0);
    }

    #[test]
    fn stieltjes_no_users_is_trace_over_alpha() {
        let s = Scenario::<f64>::new(vec![3, 2], 0, 1.0, vec![], vec![]).unwrap();
        let mut q = Mat::zeros(5, 5);
        for r in 0..5 {
            q.set(r, r, Complex::new(1.0 + r as f64, 0.0));
        }
        q.set(0, 1, Complex::new(0.2, 0.3));
        q.set(1, 0, Complex::new(0.2, -0.3));
        let alpha = 0.8;
        let got = det_stieltjes(&s, &q, alpha).unwrap();
        let want = q.trace().re / (5.0 * alpha);
        assert_relative_eq!(got, want, epsilon = 1e-13);
    }

    #[test]
    fn stieltjes_identity_weight_matches_quadratic_root() {
        let s = scen_identity(2, 4, 4);
        let got = det_stieltjes(&s, &Mat::identity(8), 1.0).unwrap();
        assert_relative_eq!(got, 0.5f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn stieltjes_approaches_trace_over_alpha_for_large_alpha() {
        let s = scen_hetero();
        let q = Mat::identity(s.n_total());
        let alpha = 1e6;
        let got = det_stieltjes(&s, &q, alpha).unwrap();
        let want = q.trace().re / (s.n_total() as f64 * alpha);
        assert!((got - want).abs() <= 1e-4 * want);
    }

    #[test]
    fn stieltjes_rejects_malformed_weight() {
        let s = scen_hetero();
        let n = s.n_total();
        assert!(matches!(
            det_stieltjes(&s, &Mat::identity(n + 1), 0.5),
            Err(Error::Dimension(_))
        ));

        let mut skew = Mat::zeros(n, n);
        skew.set(0, 1, Complex::new(1.0, 0.0));
        assert!(matches!(
            det_stieltjes(&s, &skew, 0.5),
            Err(Error::Unsupported(_))
        ));

        // Hermitian but with mass in a cross-BS block (antenna 0 is BS 0,
        // antenna 4 is BS 1).
        let mut cross = Mat::identity(n);
        cross.set(0, 4, Complex::new(0.5, 0.1));
        cross.set(4, 0, Complex::new(0.5, -0.1));
        assert!(matches!(
            det_stieltjes(&s, &cross, 0.5),
            Err(Error::Unsupported(_))
        ));
    }

    /// Draw one row block `T^{1/2} x` with `x ~ CN(0, I/N_i)`.
    fn draw_row(
        rng: &mut ChaCha8Rng,
        sqrts: &[Mat<f64>],
        n: &[usize],
        out: &mut Vec<Complex<f64>>,
    ) {
        out.clear();
        for (i, sq) in sqrts.iter().enumerate() {
            let scale = 1.0 / (2.0 * n[i] as f64).sqrt();
            let x: Vec<Complex<f64>> = (0..n[i])
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex::new(re * scale, im * scale)
                })
                .collect();
            out.extend(sq.mul_vec(&x));
        }
    }

    /// Empirical `(1/N) tr(Q_sel (H^H H + alpha I)^{-1})` averaged over
    /// `draws` channel realizations, where `Q_sel` selects `diag_range`.
    fn empirical_resolvent_trace(
        s: &Scenario<f64>,
        alpha: f64,
        draws: usize,
        seed_base: u64,
        diag_range: std::ops::Range<usize>,
    ) -> f64 {
        let n = s.n_total();
        let kk = s.k();
        // One square root per distinct link matrix.
        let sqrts: Vec<Vec<Mat<f64>>> = (0..kk)
            .map(|k| {
                (0..s.m())
                    .map(|i| sqrt_psd(s.corr(k, i), 1e-10).unwrap())
                    .collect()
            })
            .collect();
        let per_draw: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_base + t as u64);
                let mut h = Mat::zeros(kk, n);
                let mut row = Vec::with_capacity(n);
                for k in 0..kk {
                    draw_row(&mut rng, &sqrts[k], s.n(), &mut row);
                    h.row_mut(k).copy_from_slice(&row);
                }
                let mut gram = h.gram();
                gram.add_diag(alpha);
                let diag = cholesky(&gram).unwrap().inverse_diagonal();
                diag[diag_range.clone()].iter().sum::<f64>() / n as f64
            })
            .collect();
        per_draw.iter().sum::<f64>() / draws as f64
    }

    #[test]
    fn stieltjes_selector_matches_empirical_resolvent() {
        // Selector weight on BS 1's antennas, 500 draws at N=128.
        let n = 64;
        let kk = 96;
        let base = [
            exp_correlation(n, 0.3, 1.0).unwrap(),
            exp_correlation(n, 0.6, 1.0).unwrap(),
        ];
        let mut corr = Vec::new();
        for k in 0..kk {
            let gain = 0.5 + k as f64 / (kk - 1) as f64;
            for b in &base {
                corr.push(crate::scenario::scale_path_gain(b, gain).unwrap());
            }
        }
        let s = Scenario::new(vec![n; 2], kk, 10.0, corr, vec![0.0; kk * 2]).unwrap();
        let alpha = 0.5;

        let mut sel = Mat::zeros(2 * n, 2 * n);
        for r in 0..n {
            sel.set(r, r, Complex::new(1.0, 0.0));
        }
        let predicted = det_stieltjes(&s, &sel, alpha).unwrap();
        let measured = empirical_resolvent_trace(&s, alpha, 500, 0x5EED_0001, 0..n);
        let rel = (measured - predicted).abs() / predicted;
        assert!(
            rel < 0.01,
            "relative gap {rel} between predicted {predicted} and measured {measured}"
        );
    }

    #[test]
    fn resolvent_trace_error_shrinks_with_dimension() {
        // Uncorrelated homogeneous system, K = N: the gap between the
        // empirical resolvent trace and its deterministic value must fall
        // as every dimension doubles.
        let alpha = 0.5;
        let mut errs = Vec::new();
        for &n_total in &[32usize, 64, 128, 256] {
            let ni = n_total / 2;
            let s = scen_identity(2, ni, n_total);
            let predicted = det_stieltjes(&s, &Mat::identity(n_total), alpha).unwrap();
            let draws = 200;
            let per_draw: Vec<f64> = (0..draws)
                .into_par_iter()
                .map(|t| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(0xD111_0000 + n_total as u64 * 1000 + t as u64);
                    let mut h = Mat::zeros(n_total, n_total);
                    let scale = 1.0 / (2.0 * ni as f64).sqrt();
                    for k in 0..n_total {
                        for c in 0..n_total {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            h.set(k, c, Complex::new(re * scale, im * scale));
                        }
                    }
                    let mut gram = h.gram();
                    gram.add_diag(alpha);
                    let m_emp = cholesky(&gram).unwrap().inverse_diagonal().iter().sum::<f64>()
                        / n_total as f64;
                    (m_emp - predicted).abs()
                })
                .collect();
            errs.push(per_draw.iter().sum::<f64>() / draws as f64);
        }
        for w in errs.windows(2) {
            assert!(
                w[1] < w[0],
                "mean absolute resolvent error did not shrink: {errs:?}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Scaling every T by c and alpha by c leaves e unchanged.
        #[test]
        fn joint_scaling_leaves_e_invariant(
            m in 1usize..=2,
            n in 2usize..=4,
            k in 1usize..=3,
            r in 0.0f64..0.85,
            gain in 0.5f64..2.0,
            alpha in 0.05f64..2.0,
            c in 0.1f64..10.0,
        ) {
            let corr: Vec<Mat<f64>> = (0..k * m)
                .map(|idx| {
                    let g = gain * (1.0 + 0.1 * idx as f64);
                    exp_correlation(n, r, g).unwrap()
                })
                .collect();
            let scaled: Vec<Mat<f64>> = corr
                .iter()
                .map(|t| crate::scenario::scale_path_gain(t, c).unwrap())
                .collect();
            let s1 = Scenario::new(vec![n; m], k, 10.0, corr, vec![0.0; k * m]).unwrap();
            let s2 = Scenario::new(vec![n; m], k, 10.0, scaled, vec![0.0; k * m]).unwrap();
            let e1 = solve_fixed_point(&s1, alpha).unwrap().e;
            let e2 = solve_fixed_point(&s2, c * alpha).unwrap().e;
            for (a, b) in e1.iter().zip(&e2) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}
