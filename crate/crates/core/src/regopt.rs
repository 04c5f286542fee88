//! Regularization-parameter optimization for the deterministic-equivalent
//! sum rate: golden-section search on the general pipeline, the homogeneous
//! fixed-point characterization of the optimum, and its closed-form special
//! cases for uncorrelated antennas, the single cell, and perfect CSIT.

use crate::det_sinr::det_equivalent;
use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::scalar::Real;
use crate::scenario::Scenario;

/// How an [`AlphaResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMethod {
    GoldenSection,
    Prop1FixedPoint,
    ClosedFormUncorrelated,
    ClosedFormPerfect,
    ClosedFormSingleCell,
}

impl std::fmt::Display for AlphaMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AlphaMethod::GoldenSection => "golden_section",
            AlphaMethod::Prop1FixedPoint => "prop1_fixed_point",
            AlphaMethod::ClosedFormUncorrelated => "closed_form_uncorrelated",
            AlphaMethod::ClosedFormPerfect => "closed_form_perfect",
            AlphaMethod::ClosedFormSingleCell => "closed_form_single_cell",
        };
        f.write_str(s)
    }
}

/// An optimized regularization parameter with its provenance.
#[derive(Debug, Clone)]
pub struct AlphaResult<T> {
    /// The optimizing regularization parameter.
    pub alpha_opt: T,
    pub method: AlphaMethod,
    /// Deterministic sum rate at `alpha_opt`, in nats.
    pub objective: T,
    /// Search interval used (degenerate for non-search methods).
    pub bracket: (T, T),
    /// Golden-section or fixed-point iterations taken.
    pub iterations: usize,
    /// Non-fatal diagnostics (e.g. a non-unimodal coarse scan).
    pub warnings: Vec<String>,
}

/// The five trace functionals of the homogeneous reduction at one `alpha`,
/// together with the quantities derived from them.
#[derive(Debug, Clone, Copy)]
pub struct Prop1State<T> {
    /// `(1/N_1) tr(T Psi)`.
    pub e1: T,
    /// `(1/N_1) tr(T Psi^2)`.
    pub e2: T,
    /// `(1/N_1) tr((T Psi)^2)`; equals `e1^2` only when `T = I`.
    pub e3: T,
    /// `(1/N_1) tr(T Psi^3)`.
    pub e4: T,
    /// `(1/N_1) tr(T^2 Psi^3)`.
    pub e5: T,
    /// Average CSIT quality `psi = (1/M) sum_i sqrt(1 - tau_i^2)`.
    pub psi_avg: T,
    /// `eta = (e3 e4 - e5 e2) / (M e2^2 e3)`.
    pub eta: T,
    /// Load factor `beta = N_1 / K`.
    pub beta: T,
}

/// Validated homogeneous scenario reduced to the common correlation
/// spectrum; supports fast per-alpha evaluation without matrix work.
struct HomogeneousProfile<T> {
    m: usize,
    n1: usize,
    rho: T,
    beta: T,
    psi_avg: T,
    /// Eigenvalues of the common `T`, clamped to `>= 0`.
    lambdas: Vec<T>,
}

impl<T: Real> HomogeneousProfile<T> {
    fn build(s: &Scenario<T>) -> Result<Self> {
        if s.k() == 0 {
            return Err(Error::Unsupported(
                "homogeneous reduction needs at least one user".into(),
            ));
        }
        let n1 = s.n()[0];
        if s.n().iter().any(|&n| n != n1) {
            return Err(Error::Unsupported(
                "homogeneous reduction needs equal antenna counts at every BS".into(),
            ));
        }
        let t00 = s.corr(0, 0);
        for k in 0..s.k() {
            for i in 0..s.m() {
                if s.corr(k, i).data() != t00.data() {
                    return Err(Error::Unsupported(format!(
                        "correlation of user {k} at BS {i} differs from the common T"
                    )));
                }
                if s.tau2(k, i) != s.tau2(0, i) {
                    return Err(Error::Unsupported(format!(
                        "CSIT quality of user {k} at BS {i} is not user-independent"
                    )));
                }
            }
        }
        let mut psi_avg = T::zero();
        for i in 0..s.m() {
            psi_avg += (T::one() - s.tau2(0, i)).sqrt();
        }
        psi_avg /= T::of(s.m() as f64);
        if !(psi_avg > T::zero()) {
            return Err(Error::Unsupported(
                "every link has pure-noise CSIT; no finite optimum".into(),
            ));
        }

        let spectrum = eigh(t00)?;
        let lambdas: Vec<T> = spectrum
            .values
            .iter()
            .map(|l| l.max(T::zero()))
            .collect();
        if lambdas.iter().fold(T::zero(), |a, l| a + *l) <= T::zero() {
            return Err(Error::Unsupported(
                "common correlation matrix has zero trace".into(),
            ));
        }
        Ok(Self {
            m: s.m(),
            n1,
            rho: s.rho(),
            beta: T::of(n1 as f64) / T::of(s.k() as f64),
            psi_avg,
            lambdas,
        })
    }

    /// Mean over the spectrum of `lambda^p / (c lambda + alpha)^q`.
    fn spectral_mean(&self, c: T, alpha: T, p: u32, q: u32) -> T {
        let n = T::of(self.n1 as f64);
        self.lambdas
            .iter()
            .map(|&l| {
                let num = if p == 1 { l } else { l * l };
                let den = (c * l + alpha).powi(q as i32);
                num / den
            })
            .fold(T::zero(), |a, x| a + x)
            / n
    }

    /// Solve the scalar fixed point `e1 = (1/N_1) tr(T Psi)` with
    /// `Psi = (T/(beta(M e1 + 1)) + alpha I)^{-1}` and fill the full state.
    fn state(&self, alpha: T) -> Result<Prop1State<T>> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::Scenario(format!(
                "regularization parameter must be positive and finite, got {alpha}"
            )));
        }
        let mf = T::of(self.m as f64);
        let c_of = |e1: T| T::one() / (self.beta * (mf * e1 + T::one()));
        let tol = T::tol_floor(1e-13, 16.0);
        let mut e1 = T::one();
        let mut prev_residual = T::infinity();
        let mut rising = 0usize;
        let mut damped = false;
        let mut converged = false;
        for _ in 0..1000 {
            let next = self.spectral_mean(c_of(e1), alpha, 1, 1);
            let residual = (next - e1).abs() / (T::one() + next.abs());
            if residual > prev_residual {
                rising += 1;
                if rising >= 2 {
                    damped = true;
                }
            } else {
                rising = 0;
            }
            prev_residual = residual;
            e1 = if damped {
                (e1 + next) * T::of(0.5)
            } else {
                next
            };
            if residual < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                context: format!("homogeneous e1 fixed point at alpha={alpha}"),
                iterations: 1000,
                residual: prev_residual.as_f64(),
            });
        }
        let c = c_of(e1);
        let e1 = self.spectral_mean(c, alpha, 1, 1);
        let e2 = self.spectral_mean(c, alpha, 1, 2);
        let e3 = self.spectral_mean(c, alpha, 2, 2);
        let e4 = self.spectral_mean(c, alpha, 1, 3);
        let e5 = self.spectral_mean(c, alpha, 2, 3);
        let eta = (e3 * e4 - e5 * e2) / (mf * e2 * e2 * e3);
        Ok(Prop1State {
            e1,
            e2,
            e3,
            e4,
            e5,
            psi_avg: self.psi_avg,
            eta,
            beta: self.beta,
        })
    }

    /// Right-hand side of the optimality fixed-point equation at `state`.
    fn alpha_rhs(&self, st: &Prop1State<T>) -> T {
        let mf = T::of(self.m as f64);
        let psi2 = st.psi_avg * st.psi_avg;
        let one = T::one();
        let num = (one + st.eta) * st.e2 + mf * self.rho * (one - psi2) * st.e3;
        let shape = (one + st.eta) * psi2
            + (one + mf * st.e1) * (one + mf * st.e1) * (one - psi2) * st.eta;
        num / (mf * st.beta * self.rho * st.e2 * shape)
    }

    /// Deterministic SINR of the homogeneous reduction (common to all
    /// users). The numerator factor is `e3 + alpha beta e2 (M e1 + 1)^2`.
    fn gamma(&self, alpha: T, st: &Prop1State<T>) -> T {
        let mf = T::of(self.m as f64);
        let psi2 = st.psi_avg * st.psi_avg;
        let one = T::one();
        let me1p = one + mf * st.e1;
        let num =
            mf * mf * psi2 * self.rho * st.e1 * (st.e3 + alpha * st.beta * st.e2 * me1p * me1p);
        let den = (me1p * me1p * (one - psi2) + psi2) * mf * st.e3 * self.rho + me1p * me1p * st.e2;
        num / den
    }
}

/// Closed form for uncorrelated antennas (`T = I`):
/// `alpha = [(1/M) + rho (1 - psi^2)] / (beta rho psi^2)`.
pub fn alpha_uncorrelated<T: Real>(m: usize, rho: T, beta: T, psi: T) -> Result<T> {
    if m == 0 {
        return Err(Error::Scenario("cell count must be at least 1".into()));
    }
    if !(rho > T::zero()) || !(beta > T::zero()) {
        return Err(Error::Scenario(format!(
            "rho and beta must be positive, got rho={rho}, beta={beta}"
        )));
    }
    if !(psi > T::zero()) || psi > T::one() {
        return Err(Error::Scenario(format!(
            "CSIT quality psi must lie in (0, 1], got {psi}; psi = 0 has no finite optimum"
        )));
    }
    let psi2 = psi * psi;
    let mf = T::of(m as f64);
    Ok((T::one() / mf + rho * (T::one() - psi2)) / (beta * rho * psi2))
}

/// Default golden-section bracket `[1e-6, 10 max(1, 1/(M rho min_i beta_i))]`,
/// anchored at the perfect-CSIT optimum `1/(M rho beta)`; imperfect CSIT
/// shifts the optimum upward from there.
pub fn default_alpha_bracket<T: Real>(s: &Scenario<T>) -> (T, T) {
    let mf = T::of(s.m() as f64);
    let mut min_beta = T::infinity();
    for i in 0..s.m() {
        min_beta = min_beta.min(s.beta(i));
    }
    let anchor = T::one() / (mf * s.rho() * min_beta);
    (T::of(1e-6), T::of(10.0) * anchor.max(T::one()))
}

/// Golden-section maximization of `f` over `[lo, hi]` to relative width
/// `tol`. Returns the best abscissa, its value, and the iteration count.
fn golden_max<T: Real>(
    f: &mut dyn FnMut(T) -> Result<T>,
    lo: T,
    hi: T,
    tol: T,
) -> Result<(T, T, usize)> {
    let invphi = T::of((5.0_f64.sqrt() - 1.0) / 2.0);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut iterations = 0;
    while (b - a) > tol * (a + b) * T::of(0.5) && iterations < 200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1)?;
        }
        iterations += 1;
    }
    let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, fx, iterations))
}

/// Maximize the deterministic sum rate over the regularization parameter by
/// golden-section search.
///
/// An 11-point log-spaced coarse scan spot-checks unimodality (a violation
/// is reported as a warning, not an error) and locates the bracket for the
/// golden section; if the scan maximum sits at the upper boundary, the
/// bracket is expanded tenfold, up to three times.
pub fn golden_section_alpha<T: Real>(
    s: &Scenario<T>,
    bracket: (T, T),
    tol: T,
) -> Result<AlphaResult<T>> {
    let (lo, mut hi) = bracket;
    if !(lo > T::zero()) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::Scenario(format!(
            "bracket must satisfy 0 < lo < hi < inf, got ({lo}, {hi})"
        )));
    }
    let tol = tol.max(T::tol_floor(0.0, 64.0));
    let mut objective = |alpha: T| -> Result<T> {
        Ok(det_equivalent(s, alpha)?.sum_rate_nats)
    };

    const SCAN: usize = 11;
    let mut warnings = Vec::new();
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for expansion in 0..=3 {
        xs.clear();
        fs.clear();
        let llo = lo.ln();
        let step = (hi.ln() - llo) / T::of((SCAN - 1) as f64);
        for j in 0..SCAN {
            let x = (llo + step * T::of(j as f64)).exp();
            xs.push(x);
            fs.push(objective(x)?);
        }
        let best = (0..SCAN)
            .max_by(|&a, &b| fs[a].partial_cmp(&fs[b]).expect("rate is not NaN"))
            .expect("non-empty scan");
        if best + 1 < SCAN || expansion == 3 {
            let peaks = (1..SCAN - 1)
                .filter(|&j| fs[j] > fs[j - 1] && fs[j] > fs[j + 1])
                .count();
            if peaks > 1 {
                warnings.push(format!(
                    "coarse scan found {peaks} interior maxima; the objective may not be unimodal over ({lo}, {hi})"
                ));
            }
            let glo = xs[best.saturating_sub(1)];
            let ghi = xs[(best + 1).min(SCAN - 1)];
            let (x, fx, iterations) = golden_max(&mut objective, glo, ghi, tol)?;
            // Never return worse than a scanned point (edge maxima).
            let (alpha_opt, best_obj) = if fs[best] > fx {
                (xs[best], fs[best])
            } else {
                (x, fx)
            };
            return Ok(AlphaResult {
                alpha_opt,
                method: AlphaMethod::GoldenSection,
                objective: best_obj,
                bracket: (lo, hi),
                iterations,
                warnings,
            });
        }
        hi = hi * T::of(10.0);
    }
    unreachable!("scan loop always returns by the final expansion");
}

/// Solve the homogeneous optimality fixed point by direct iteration from
/// the perfect-CSIT anchor `1/(M rho beta)`.
///
/// Requires the homogeneity conditions to hold exactly: equal antenna
/// counts, user-independent `tau_i` with at least one link below pure
/// noise, and one common correlation matrix for every link.
pub fn prop1_alpha<T: Real>(s: &Scenario<T>) -> Result<AlphaResult<T>> {
    let profile = HomogeneousProfile::build(s)?;
    let mf = T::of(profile.m as f64);
    let mut alpha = T::one() / (mf * profile.rho * profile.beta);
    let tol = T::tol_floor(1e-8, 64.0);
    let mut trajectory = vec![alpha];
    for iteration in 1..=200 {
        let st = profile.state(alpha)?;
        let next = profile.alpha_rhs(&st);
        if !(next > T::zero()) || !next.is_finite() {
            return Err(Error::Convergence {
                context: format!(
                    "optimality fixed point left the positive axis: alpha trajectory {:?}",
                    trajectory.iter().map(|a| a.as_f64()).collect::<Vec<_>>()
                ),
                iterations: iteration,
                residual: f64::NAN,
            });
        }
        let rel = (next - alpha).abs() / next;
        trajectory.push(next);
        alpha = next;
        if rel < tol {
            let objective = det_equivalent(s, alpha)?.sum_rate_nats;
            return Ok(AlphaResult {
                alpha_opt: alpha,
                method: AlphaMethod::Prop1FixedPoint,
                objective,
                bracket: (alpha, alpha),
                iterations: iteration,
                warnings: Vec::new(),
            });
        }
    }
    let tail: Vec<f64> = trajectory
        .iter()
        .rev()
        .take(8)
        .rev()
        .map(|a| a.as_f64())
        .collect();
    Err(Error::Convergence {
        context: format!("optimality fixed point did not settle; recent alpha values {tail:?}"),
        iterations: 200,
        residual: {
            let n = trajectory.len();
            ((trajectory[n - 1] - trajectory[n - 2]).abs() / trajectory[n - 1]).as_f64()
        },
    })
}

/// The five trace functionals and derived quantities of the homogeneous
/// reduction at a given `alpha`.
pub fn prop1_state<T: Real>(s: &Scenario<T>, alpha: T) -> Result<Prop1State<T>> {
    HomogeneousProfile::build(s)?.state(alpha)
}

/// Closed-form deterministic SINR of the homogeneous reduction (identical
/// for every user); equals the general pipeline's `gamma_bar` to 1e-10.
pub fn gamma_bar_homogeneous<T: Real>(s: &Scenario<T>, alpha: T) -> Result<T> {
    let profile = HomogeneousProfile::build(s)?;
    let st = profile.state(alpha)?;
    Ok(profile.gamma(alpha, &st))
}

/// Closed-form optimum for scenarios whose common correlation is a scaled
/// identity `T = g I`. Scaling every channel by `sqrt(g)` maps the problem
/// onto the plain-identity one at effective SNR `rho g` with regularizer
/// `alpha / g`, so the optimum is `g` times the uncorrelated formula
/// evaluated at `rho g`. Dispatches to the perfect-CSIT / single-cell
/// labels when they apply.
pub fn closed_form_alpha<T: Real>(s: &Scenario<T>) -> Result<AlphaResult<T>> {
    let profile = HomogeneousProfile::build(s)?;
    let t00 = s.corr(0, 0);
    let g = t00.get(0, 0).re;
    for r in 0..t00.rows() {
        for c in 0..t00.cols() {
            let v = t00.get(r, c);
            let want_re = if r == c { g } else { T::zero() };
            if v.re != want_re || v.im != T::zero() {
                return Err(Error::Unsupported(
                    "closed form needs a scaled-identity common correlation".into(),
                ));
            }
        }
    }
    let rho_eff = profile.rho * g;
    let method = if profile.psi_avg == T::one() {
        AlphaMethod::ClosedFormPerfect
    } else if profile.m == 1 {
        AlphaMethod::ClosedFormSingleCell
    } else {
        AlphaMethod::ClosedFormUncorrelated
    };
    let alpha = g * alpha_uncorrelated(profile.m, rho_eff, profile.beta, profile.psi_avg)?;
    let objective = det_equivalent(s, alpha)?.sum_rate_nats;
    Ok(AlphaResult {
        alpha_opt: alpha,
        method,
        objective,
        bracket: (alpha, alpha),
        iterations: 0,
        warnings: Vec::new(),
    })
}
