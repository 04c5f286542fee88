//! Deterministic-equivalent SINR and sum-rate assembly.
//!
//! Combines a converged fixed point and its companion coefficients into the
//! per-user large-system SINR
//!
//! ```text
//! gamma_k = (u2_k)^2 / ((1 + u1_k)^2 (u_k + nu))
//! ```
//!
//! where `u1_k` aggregates the per-link resolvent gains, `u2_k` is the same
//! aggregate weighted by the CSIT quality factors `psi_{k,i}`, the
//! regularization-sensitivity terms `du1/du2` enter through `u_k`, and `nu`
//! captures the per-BS power normalization of the worst-loaded BS. Rates are
//! kept in nats internally; output layers convert to bits.

use crate::error::{Error, Result};
use crate::rmt_core::{DerivedTraces, DotCSolution, FixedPointSolution};
use crate::scalar::Real;
use crate::scenario::Scenario;

/// Deterministic-equivalent terms for one (scenario, alpha) pair.
///
/// [`compute_u_terms`] fills everything except `gamma_bar` and
/// `sum_rate_nats`; [`det_equivalent`] runs the full pipeline and returns a
/// completed value.
#[derive(Debug, Clone)]
pub struct DetEquivalent<T> {
    /// Regularization parameter the terms were computed at.
    pub alpha: T,
    /// Per-user aggregate resolvent gain.
    pub u1: Vec<T>,
    /// Per-user aggregate gain weighted by CSIT quality.
    pub u2: Vec<T>,
    /// Per-user regularization sensitivity of `u1`.
    pub du1: Vec<T>,
    /// Per-user regularization sensitivity of `u2`.
    pub du2: Vec<T>,
    /// Per-user interference-plus-signal-power term.
    pub uk: Vec<T>,
    /// Effective inverse-SNR term of the binding (worst) BS.
    pub nu_bar: T,
    /// Per-user deterministic SINR (empty until completed).
    pub gamma_bar: Vec<T>,
    /// Sum rate in nats (zero until completed).
    pub sum_rate_nats: T,
    /// Number of SINRs clamped to zero from tiny negative rounding.
    pub clamped_negatives: usize,
}

/// Assemble the per-user `u` terms and `nu_bar` from converged solutions.
///
/// The returned value is partial: `gamma_bar` and `sum_rate_nats` are left
/// empty/zero for [`gamma_bar`] and [`sum_rate_bar`] to fill.
pub fn compute_u_terms<T: Real>(
    s: &Scenario<T>,
    fp: &FixedPointSolution<T>,
    dc: &DotCSolution<T>,
) -> Result<DetEquivalent<T>> {
    let m = s.m();
    let kk = s.k();
    if fp.psi.len() != m || fp.e.len() != kk * m || dc.dotc.len() != kk * m {
        return Err(Error::Dimension(format!(
            "solution shapes (e: {}, dotc: {}) do not match scenario (M={m}, K={kk})",
            fp.e.len(),
            dc.dotc.len()
        )));
    }
    let alpha = fp.alpha;
    let traces = DerivedTraces::compute(s, fp);
    let nf = |i: usize| T::of(s.n()[i] as f64);

    // Regularization sensitivity of each link gain.
    let mut edot = vec![T::zero(); kk * m];
    for k in 0..kk {
        for i in 0..m {
            let mut coupling = T::zero();
            for l in 0..kk {
                coupling += dc.dotc_at(l, i) * traces.t_pair(i, k, l);
            }
            edot[k * m + i] = (traces.t_psi2(k, i) - coupling) / nf(i);
        }
    }

    let mut u1 = vec![T::zero(); kk];
    let mut u2 = vec![T::zero(); kk];
    let mut du1 = vec![T::zero(); kk];
    let mut du2 = vec![T::zero(); kk];
    for k in 0..kk {
        for i in 0..m {
            let psi_q = s.psi(k, i);
            u1[k] += fp.e_at(k, i);
            u2[k] += psi_q * fp.e_at(k, i);
            du1[k] += edot[k * m + i];
            du2[k] += psi_q * edot[k * m + i];
        }
    }

    let uk = (0..kk)
        .map(|k| {
            let denom = T::one() + u1[k];
            u1[k] - alpha * du1[k] - T::of(2.0) * u2[k] * (u2[k] - alpha * du2[k]) / denom
                + u2[k] * u2[k] * (u1[k] - alpha * du1[k]) / (denom * denom)
        })
        .collect();

    // Worst-BS normalization term, first max winning ties.
    let mut nu_bar = T::neg_infinity();
    for i in 0..m {
        let mut corr = T::zero();
        for k in 0..kk {
            corr += dc.dotc_at(k, i) * traces.t_psi2(k, i);
        }
        let cand = (traces.psi_tr(i) - alpha * traces.psi2_tr(i) + alpha * corr)
            / (nf(i) * s.rho());
        if cand > nu_bar {
            nu_bar = cand;
        }
    }

    Ok(DetEquivalent {
        alpha,
        u1,
        u2,
        du1,
        du2,
        uk,
        nu_bar,
        gamma_bar: Vec::new(),
        sum_rate_nats: T::zero(),
        clamped_negatives: 0,
    })
}

fn clamp_sinr<T: Real>(raw: T, user: usize, clamped: &mut usize) -> Result<T> {
    if raw >= T::zero() && raw.is_finite() {
        return Ok(raw);
    }
    if raw < T::zero() && raw > -T::tol_floor(1e-12, 16.0) {
        *clamped += 1;
        return Ok(T::zero());
    }
    Err(Error::Linalg(format!(
        "deterministic SINR for user {user} is {raw}; upstream solution is invalid"
    )))
}

/// Per-user deterministic SINR from assembled `u` terms.
pub fn gamma_bar<T: Real>(det: &DetEquivalent<T>) -> Result<Vec<T>> {
    let mut clamped = 0;
    gamma_from_terms(det, &mut clamped)
}

fn gamma_from_terms<T: Real>(det: &DetEquivalent<T>, clamped: &mut usize) -> Result<Vec<T>> {
    (0..det.u1.len())
        .map(|k| {
            let lift = T::one() + det.u1[k];
            let raw = det.u2[k] * det.u2[k] / (lift * lift * (det.uk[k] + det.nu_bar));
            clamp_sinr(raw, k, clamped)
        })
        .collect()
}

/// Per-user deterministic SINR via the simplified perfect-CSIT formula.
///
/// Requires every `tau_{k,i} = 0`; under that condition this equals the
/// general pipeline algebraically and serves as an independent check of it.
pub fn gamma_bar_perfect<T: Real>(
    s: &Scenario<T>,
    fp: &FixedPointSolution<T>,
    dc: &DotCSolution<T>,
) -> Result<Vec<T>> {
    if !s.perfect_csit() {
        return Err(Error::Unsupported(
            "perfect-CSIT SINR formula requires tau = 0 on every link".into(),
        ));
    }
    let det = compute_u_terms(s, fp, dc)?;
    let mut clamped = 0;
    (0..det.u1.len())
        .map(|k| {
            let lift = T::one() + det.u1[k];
            let sens = det.u1[k] - det.alpha * det.du1[k];
            let raw = det.u1[k] * det.u1[k] / (sens + lift * lift * det.nu_bar);
            clamp_sinr(raw, k, &mut clamped)
        })
        .collect()
}

/// Sum rate in nats, `sum_k ln(1 + gamma_k)`.
pub fn sum_rate_bar<T: Real>(det: &DetEquivalent<T>) -> T {
    det.gamma_bar
        .iter()
        .fold(T::zero(), |acc, g| acc + (T::one() + *g).ln())
}

/// Full deterministic-equivalent pipeline: fixed point, companion system,
/// `u` terms, SINRs, and sum rate.
pub fn det_equivalent<T: Real>(s: &Scenario<T>, alpha: T) -> Result<DetEquivalent<T>> {
    let fp = crate::rmt_core::solve_fixed_point(s, alpha)?;
    let dc = crate::rmt_core::solve_dotc(s, &fp)?;
    let mut det = compute_u_terms(s, &fp, &dc)?;
    let mut clamped = 0;
    det.gamma_bar = gamma_from_terms(&det, &mut clamped)?;
    det.clamped_negatives = clamped;
    det.sum_rate_nats = sum_rate_bar(&det);
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::rmt_core::{solve_dotc, solve_fixed_point};
    use crate::scenario::exp_correlation;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scen_identity(m: usize, n: usize, k: usize, rho: f64, tau2: f64) -> Scenario<f64> {
        let corr = (0..k * m).map(|_| Mat::identity(n)).collect();
        Scenario::new(vec![n; m], k, rho, corr, vec![tau2; k * m]).unwrap()
    }

    fn scen_hetero(tau2: Vec<f64>) -> Scenario<f64> {
        let n = [3usize, 5];
        let k = 3;
        let mut corr = Vec::new();
        for ku in 0..k {
            for (i, &ni) in n.iter().enumerate() {
                let r = 0.1 + 0.12 * (ku * 2 + i) as f64;
                let gain = 0.6 + 0.3 * (ku + i) as f64;
                corr.push(exp_correlation(ni, r, gain).unwrap());
            }
        }
        Scenario::new(n.to_vec(), k, 10.0, corr, tau2).unwrap()
    }

    fn pipeline(s: &Scenario<f64>, alpha: f64) -> DetEquivalent<f64> {
        det_equivalent(s, alpha).unwrap()
    }

    #[test]
    fn perfect_csit_collapses_u_pairs() {
        let s = scen_hetero(vec![0.0; 6]);
        let det = pipeline(&s, 0.3);
        for k in 0..s.k() {
            assert!((det.u1[k] - det.u2[k]).abs() <= 1e-12);
            assert!((det.du1[k] - det.du2[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_identity_u1_is_sqrt_two() {
        // M=2, N_i=4, K=4, T=I, alpha=1: u1 = M * e = sqrt(2).
        let s = scen_identity(2, 4, 4, 10.0, 0.0);
        let det = pipeline(&s, 1.0);
        for k in 0..4 {
            assert_relative_eq!(det.u1[k], 2.0f64.sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn perfect_csit_uk_matches_simplified_form() {
        for s in [scen_identity(2, 8, 8, 10.0, 0.0), scen_hetero(vec![0.0; 6])] {
            let det = pipeline(&s, 0.5);
            for k in 0..s.k() {
                let lift = 1.0 + det.u1[k];
                let simplified = (det.u1[k] - det.alpha * det.du1[k]) / (lift * lift);
                assert!((det.uk[k] - simplified).abs() <= 1e-12 * (1.0 + simplified.abs()));
            }
        }
    }

    #[test]
    fn pure_noise_csit_zeroes_gamma() {
        let s = scen_identity(2, 4, 4, 10.0, 1.0);
        let det = pipeline(&s, 0.8);
        for k in 0..4 {
            assert_eq!(det.u2[k], 0.0);
            assert_eq!(det.gamma_bar[k], 0.0);
        }
        assert_eq!(det.sum_rate_nats, 0.0);
    }

    #[test]
    fn perfect_pipeline_matches_direct_formula() {
        let s = scen_hetero(vec![0.0; 6]);
        for alpha in [0.05, 0.3, 1.5] {
            let fp = solve_fixed_point(&s, alpha).unwrap();
            let dc = solve_dotc(&s, &fp).unwrap();
            let general = pipeline(&s, alpha).gamma_bar;
            let direct = gamma_bar_perfect(&s, &fp, &dc).unwrap();
            for (g, d) in general.iter().zip(&direct) {
                assert!((g - d).abs() <= 1e-12 * (1.0 + d.abs()), "{g} vs {d}");
            }
        }
    }

    #[test]
    fn perfect_formula_rejects_imperfect_csit() {
        let s = scen_identity(2, 4, 4, 10.0, 0.1);
        let fp = solve_fixed_point(&s, 0.5).unwrap();
        let dc = solve_dotc(&s, &fp).unwrap();
        assert!(matches!(
            gamma_bar_perfect(&s, &fp, &dc),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn high_snr_small_alpha_gamma_approaches_u1() {
        // With alpha and nu both near zero the SINR collapses to u1. The
        // system must be overloaded (K > N) so the link gains stay bounded
        // as alpha vanishes.
        let rho = 1e6; // 60 dB
        let s = scen_identity(2, 8, 32, rho, 0.0);
        let det = pipeline(&s, 1e-4);
        for k in 0..s.k() {
            let rel = (det.gamma_bar[k] - det.u1[k]).abs() / det.u1[k];
            assert!(rel < 0.1, "relative gap {rel}");
        }
    }

    #[test]
    fn nu_bar_scales_inversely_with_rho() {
        let base = scen_hetero(vec![0.1, 0.0, 0.2, 0.3, 0.05, 0.15]);
        let det1 = pipeline(&base, 0.4);
        let boosted = Scenario::new(
            base.n().to_vec(),
            base.k(),
            base.rho() * 7.5,
            (0..base.k() * base.m())
                .map(|idx| base.corr(idx / base.m(), idx % base.m()).clone())
                .collect(),
            (0..base.k() * base.m())
                .map(|idx| base.tau2(idx / base.m(), idx % base.m()))
                .collect(),
        )
        .unwrap();
        let det2 = pipeline(&boosted, 0.4);
        assert_relative_eq!(det2.nu_bar * 7.5, det1.nu_bar, max_relative = 1e-12);
    }

    #[test]
    fn u2_never_exceeds_u1() {
        let s = scen_hetero(vec![0.1, 0.0, 0.2, 0.3, 0.05, 0.15]);
        let det = pipeline(&s, 0.4);
        assert!(det.nu_bar > 0.0);
        for k in 0..s.k() {
            assert!(det.u2[k] <= det.u1[k] + 1e-15);
            assert!(det.gamma_bar[k] >= 0.0);
        }
    }

    #[test]
    fn user_permutation_permutes_gamma() {
        let tau2 = vec![0.1, 0.0, 0.2, 0.3, 0.05, 0.15];
        let s = scen_hetero(tau2.clone());
        let perm = [2usize, 0, 1];
        let corr_p: Vec<Mat<f64>> = perm
            .iter()
            .flat_map(|&old| (0..2).map(move |i| (old, i)))
            .map(|(old, i)| s.corr(old, i).clone())
            .collect();
        let mut tau_p = Vec::new();
        for &old in &perm {
            tau_p.extend_from_slice(&tau2[old * 2..old * 2 + 2]);
        }
        let sp = Scenario::new(s.n().to_vec(), s.k(), s.rho(), corr_p, tau_p).unwrap();

        let det = pipeline(&s, 0.4);
        let det_p = pipeline(&sp, 0.4);
        for (new, &old) in perm.iter().enumerate() {
            assert_relative_eq!(
                det_p.gamma_bar[new],
                det.gamma_bar[old],
                max_relative = 1e-9
            );
        }
        assert_relative_eq!(
            det_p.sum_rate_nats,
            det.sum_rate_nats,
            max_relative = 1e-9
        );
    }

    #[test]
    fn sum_rate_closed_forms() {
        let mut det = DetEquivalent {
            alpha: 1.0,
            u1: vec![0.0; 2],
            u2: vec![0.0; 2],
            du1: vec![0.0; 2],
            du2: vec![0.0; 2],
            uk: vec![0.0; 2],
            nu_bar: 1.0,
            gamma_bar: vec![0.0, 0.0],
            sum_rate_nats: 0.0,
            clamped_negatives: 0,
        };
        assert_eq!(sum_rate_bar(&det), 0.0);
        det.gamma_bar = vec![1.0, std::f64::consts::E - 1.0];
        assert_relative_eq!(
            sum_rate_bar(&det),
            std::f64::consts::LN_2 + 1.0,
            epsilon = 1e-15
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Improving a single link's CSIT never hurts that user.
        #[test]
        fn better_csit_does_not_reduce_gamma(
            n in 2usize..=4,
            k in 1usize..=3,
            r in 0.0f64..0.8,
            alpha in 0.05f64..2.0,
            rho in 1.0f64..100.0,
            link in 0usize..6,
            t_lo in 0.0f64..1.0,
            spread in 0.0f64..1.0,
        ) {
            let m = 2;
            let (ku, i) = ((link / m).min(k - 1), link % m);
            let t_hi = t_lo + spread * (1.0 - t_lo);
            let corr: Vec<Mat<f64>> = (0..k * m)
                .map(|idx| exp_correlation(n, r, 1.0 + 0.2 * idx as f64).unwrap())
                .collect();
            let mut tau_lo = vec![0.2; k * m];
            tau_lo[ku * m + i] = t_lo;
            let mut tau_hi = tau_lo.clone();
            tau_hi[ku * m + i] = t_hi;
            let s_lo = Scenario::new(vec![n; m], k, rho, corr.clone(), tau_lo).unwrap();
            let s_hi = Scenario::new(vec![n; m], k, rho, corr, tau_hi).unwrap();
            let g_lo = det_equivalent(&s_lo, alpha).unwrap().gamma_bar[ku];
            let g_hi = det_equivalent(&s_hi, alpha).unwrap().gamma_bar[ku];
            prop_assert!(
                g_lo >= g_hi - 1e-10 * (1.0 + g_hi),
                "gamma fell from {g_hi} to {g_lo} when tau^2 dropped {t_hi} -> {t_lo}"
            );
        }
    }
}
