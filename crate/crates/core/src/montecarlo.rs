//! Monte-Carlo oracle: correlated channel draws, RZF precoding with per-BS
//! power normalization, instantaneous SINRs, and ergodic sum-rate estimates.
//!
//! This is the ground-truth side of the crate. It simulates the system
//! directly so the deterministic equivalents can be validated against it:
//! channels are `h_{k,i} = T_{k,i}^{1/2} x_{k,i}` with CSIT estimates
//! `hhat_{k,i} = T_{k,i}^{1/2} (psi_{k,i} x_{k,i} + tau_{k,i} v_{k,i})`,
//! the precoder is `G = xi (Hhat^H Hhat + alpha I)^{-1} Hhat^H` with `xi`
//! chosen so every BS meets its power budget and the binding BS sits at
//! equality, and rates are averaged over seeded, reproducible trials.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::det_sinr::compute_u_terms;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sqrt_psd, Mat};
use crate::rmt_core::{solve_dotc, solve_fixed_point};
use crate::scalar::Real;
use crate::scenario::Scenario;

/// RNG stream for the synthetic bilinear-form draws of the lemma validator,
/// kept distinct from the channel stream of the same trial seed.
const LEMMA_STREAM: u64 = 0x4C45_4D31;

/// Derive the seed for one trial from the master seed.
///
/// The mapping depends only on `(master_seed, trial)`, so trial `t` of a
/// 2000-trial run draws exactly the same realization as trial `t` of a
/// 10-trial run, and workers may process trials in any order.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut z = master_seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn kahan_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for x in values {
        let y = x - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean and (sample) standard error of the mean; SE is 0 for n < 2.
fn mean_and_se<T: Real>(samples: &[T]) -> (T, T) {
    let n = samples.len();
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let nf = T::of(n as f64);
    let mean = kahan_sum(samples.iter().copied()) / nf;
    if n < 2 {
        return (mean, T::zero());
    }
    let var = kahan_sum(samples.iter().map(|x| (*x - mean) * (*x - mean)))
        / T::of((n - 1) as f64);
    (mean, (var / nf).sqrt())
}

/// One drawn channel realization, rows storing conjugate-transposed vectors
/// (`H[k] = h_k^H`).
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    /// Inner random rows `x_k^H`; per-block entry variance `1/N_i`.
    pub x: Mat<T>,
    /// CSIT-noise rows `v_k^H`, independent of `x`.
    pub v: Mat<T>,
    /// True channel rows `h_k^H`.
    pub h: Mat<T>,
    /// Estimated channel rows `hhat_k^H`.
    pub hhat: Mat<T>,
    /// Seed this realization was drawn from.
    pub seed: u64,
}

/// Reusable channel sampler for one scenario; precomputes the matrix square
/// roots `T_{k,i}^{1/2}` (deduplicated across identical links).
pub struct ChannelSampler<'a, T: Real> {
    scenario: &'a Scenario<T>,
    /// Index into `sqrts` per link, `k * M + i`.
    link_sqrt: Vec<usize>,
    sqrts: Vec<Mat<T>>,
}

impl<'a, T: Real> ChannelSampler<'a, T> {
    pub fn new(scenario: &'a Scenario<T>) -> Result<Self> {
        let mut link_sqrt = Vec::with_capacity(scenario.k() * scenario.m());
        let mut sqrts: Vec<Mat<T>> = Vec::new();
        let mut keys: Vec<Vec<u64>> = Vec::new();
        for k in 0..scenario.k() {
            for i in 0..scenario.m() {
                let t = scenario.corr(k, i);
                let key: Vec<u64> = t
                    .data()
                    .iter()
                    .flat_map(|z| [z.re.as_f64().to_bits(), z.im.as_f64().to_bits()])
                    .collect();
                match keys.iter().position(|k| *k == key) {
                    Some(idx) => link_sqrt.push(idx),
                    None => {
                        let tol = T::tol_floor(1e-10, 64.0) * t.max_abs().max(T::one());
                        sqrts.push(sqrt_psd(t, tol)?);
                        keys.push(key);
                        link_sqrt.push(sqrts.len() - 1);
                    }
                }
            }
        }
        Ok(Self {
            scenario,
            link_sqrt,
            sqrts,
        })
    }

    /// Draw one realization. All of `x` is drawn first, then all of `v`, in
    /// user-major block order, so the realization depends only on the seed.
    pub fn draw(&self, seed: u64) -> ChannelRealization<T> {
        let s = self.scenario;
        let (kk, m, n) = (s.k(), s.m(), s.n_total());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw_block = |rng: &mut ChaCha8Rng, n_i: usize| -> Vec<Complex<T>> {
            let scale = T::one() / (T::of(2.0) * T::of(n_i as f64)).sqrt();
            (0..n_i)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex::new(T::of(re) * scale, T::of(im) * scale)
                })
                .collect()
        };
        // Raw column entries of x_{k,i} and v_{k,i} in draw order.
        let mut raw_x: Vec<Vec<Complex<T>>> = Vec::with_capacity(kk * m);
        for _ in 0..kk {
            for i in 0..m {
                raw_x.push(draw_block(&mut rng, s.n()[i]));
            }
        }
        let mut raw_v: Vec<Vec<Complex<T>>> = Vec::with_capacity(kk * m);
        for _ in 0..kk {
            for i in 0..m {
                raw_v.push(draw_block(&mut rng, s.n()[i]));
            }
        }

        let mut x = Mat::zeros(kk, n);
        let mut v = Mat::zeros(kk, n);
        let mut h = Mat::zeros(kk, n);
        let mut hhat = Mat::zeros(kk, n);
        for k in 0..kk {
            for i in 0..m {
                let off = s.offset(i);
                let n_i = s.n()[i];
                let xc = &raw_x[k * m + i];
                let vc = &raw_v[k * m + i];
                let sq = &self.sqrts[self.link_sqrt[k * m + i]];
                let hc = sq.mul_vec(xc);
                for a in 0..n_i {
                    x.set(k, off + a, xc[a].conj());
                    v.set(k, off + a, vc[a].conj());
                    h.set(k, off + a, hc[a].conj());
                }
                let tau2 = s.tau2(k, i);
                if tau2 == T::zero() {
                    // Perfect link: the estimate is the channel, bit for bit.
                    for a in 0..n_i {
                        hhat.set(k, off + a, hc[a].conj());
                    }
                } else {
                    let psi = s.psi(k, i);
                    let tau = tau2.sqrt();
                    let mixed: Vec<Complex<T>> = xc
                        .iter()
                        .zip(vc)
                        .map(|(xa, va)| {
                            Complex::new(
                                psi * xa.re + tau * va.re,
                                psi * xa.im + tau * va.im,
                            )
                        })
                        .collect();
                    let hhc = sq.mul_vec(&mixed);
                    for a in 0..n_i {
                        hhat.set(k, off + a, hhc[a].conj());
                    }
                }
            }
        }
        ChannelRealization {
            x,
            v,
            h,
            hhat,
            seed,
        }
    }
}

/// Draw one channel realization (convenience wrapper; build a
/// [`ChannelSampler`] to amortize the square-root factorizations across
/// many draws).
pub fn draw_channels<T: Real>(s: &Scenario<T>, seed: u64) -> Result<ChannelRealization<T>> {
    Ok(ChannelSampler::new(s)?.draw(seed))
}

/// RZF precoder state for one realization.
#[derive(Debug, Clone)]
pub struct PrecoderState<T> {
    /// Regularized inverse `What = (Hhat^H Hhat + alpha I)^{-1}`.
    pub what: Mat<T>,
    /// Unnormalized precoder `What Hhat^H` (N by K).
    pub g_unnorm: Mat<T>,
    /// Per-BS normalized trace `Phi_i = (1/N) tr(E_i What Hhat^H Hhat What^H E_i)`.
    pub phi: Vec<T>,
    /// Power normalization `xi^2 = min_i (N_i/N) rho / Phi_i`.
    pub xi2: T,
    /// Effective noise term `nu = max_i N Phi_i / (N_i rho)`; equals `1/xi^2`.
    pub nu: T,
    /// Realized per-BS transmit powers `tr(E_i G G^H E_i)` after scaling.
    pub powers: Vec<T>,
    /// BS whose power budget binds (first max of `nu` candidates).
    pub binding_bs: usize,
}

impl<T: Real> PrecoderState<T> {
    /// Normalized precoder `G = xi * What Hhat^H`.
    pub fn g(&self) -> Mat<T> {
        self.g_unnorm.scale(self.xi2.sqrt())
    }
}

/// Build the RZF precoder for one realization and enforce the per-BS power
/// budget: every BS must satisfy `tr(E_i G G^H E_i) <= N_i rho` and the
/// binding BS must sit at equality, both within 1e-9 relative.
pub fn rzf_precoder<T: Real>(
    s: &Scenario<T>,
    ch: &ChannelRealization<T>,
    alpha: T,
) -> Result<PrecoderState<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::Scenario(format!(
            "regularization parameter must be positive and finite, got {alpha}"
        )));
    }
    let n = s.n_total();
    let kk = s.k();
    if ch.hhat.rows() != kk || ch.hhat.cols() != n {
        return Err(Error::Dimension(format!(
            "realization is {}x{}, scenario expects {kk}x{n}",
            ch.hhat.rows(),
            ch.hhat.cols()
        )));
    }
    let mut a = ch.hhat.gram();
    a.add_diag(alpha);
    let factor = cholesky(&a)?;
    let what = factor.inverse_hermitized();
    let g_unnorm = factor.solve_mat(&ch.hhat.herm());

    let nf = T::of(n as f64);
    let mut phi = vec![T::zero(); s.m()];
    for i in 0..s.m() {
        let mut acc = T::zero();
        for r in s.offset(i)..s.offset(i + 1) {
            for c in 0..kk {
                acc += g_unnorm.get(r, c).norm_sqr();
            }
        }
        phi[i] = acc / nf;
    }

    // nu candidates are 1/xi_i^2; first max wins so xi^2 = 1/nu exactly.
    let mut nu = T::neg_infinity();
    let mut binding_bs = 0;
    for (i, p) in phi.iter().enumerate() {
        let cand = nf * *p / (T::of(s.n()[i] as f64) * s.rho());
        if cand > nu {
            nu = cand;
            binding_bs = i;
        }
    }
    if !(nu > T::zero()) || !nu.is_finite() {
        return Err(Error::Linalg(
            "estimated channel carries no power; precoder normalization undefined".into(),
        ));
    }
    let xi2 = T::one() / nu;

    let tol = T::tol_floor(1e-9, 128.0);
    let mut powers = vec![T::zero(); s.m()];
    for i in 0..s.m() {
        let budget = T::of(s.n()[i] as f64) * s.rho();
        powers[i] = xi2 * nf * phi[i];
        if powers[i] > budget * (T::one() + tol) {
            return Err(Error::Linalg(format!(
                "BS {i} exceeds its power budget: {} > {}",
                powers[i].as_f64(),
                budget.as_f64()
            )));
        }
    }
    let budget = T::of(s.n()[binding_bs] as f64) * s.rho();
    if (powers[binding_bs] - budget).abs() > tol * budget {
        return Err(Error::Linalg(format!(
            "binding BS {binding_bs} is not at its power budget: {} vs {}",
            powers[binding_bs].as_f64(),
            budget.as_f64()
        )));
    }

    Ok(PrecoderState {
        what,
        g_unnorm,
        phi,
        xi2,
        nu,
        powers,
        binding_bs,
    })
}

/// Per-user signal forms `h_k^H What hhat_k` and interference powers
/// `h_k^H What Hhat_[k]^H Hhat_[k] What h_k`.
fn per_user_forms<T: Real>(
    ch: &ChannelRealization<T>,
    ps: &PrecoderState<T>,
) -> (Vec<Complex<T>>, Vec<T>) {
    let kk = ch.h.rows();
    let mut signals = Vec::with_capacity(kk);
    let mut interference = Vec::with_capacity(kk);
    for k in 0..kk {
        let hk: Vec<Complex<T>> = ch.h.row(k).iter().map(|z| z.conj()).collect();
        let w = ps.what.mul_vec(&hk);
        // t_l = hhat_l^H What h_k; the signal is its conjugate at l = k.
        let t = ch.hhat.mul_vec(&w);
        signals.push(t[k].conj());
        let total: T = kahan_sum(t.iter().map(|z| z.norm_sqr()));
        interference.push(total - t[k].norm_sqr());
    }
    (signals, interference)
}

/// Instantaneous per-user SINRs
/// `gamma_k = |h_k^H What hhat_k|^2 / (h_k^H What Hhat_[k]^H Hhat_[k] What h_k + nu)`.
pub fn instant_sinr<T: Real>(
    s: &Scenario<T>,
    ch: &ChannelRealization<T>,
    ps: &PrecoderState<T>,
) -> Vec<T> {
    assert_eq!(ch.h.rows(), s.k(), "realization does not match scenario");
    let (signals, interference) = per_user_forms(ch, ps);
    signals
        .iter()
        .zip(&interference)
        .map(|(sig, intf)| sig.norm_sqr() / (*intf + ps.nu))
        .collect()
}

/// Ergodic sum-rate estimate.
#[derive(Debug, Clone)]
pub struct RateEstimate<T> {
    /// Mean sum rate over trials, in nats.
    pub mean_nats: T,
    /// Sample standard error of the mean, in nats.
    pub std_error_nats: T,
    /// Trials averaged.
    pub trials: usize,
    /// Per-trial sum rates in trial-index order, in nats.
    pub per_trial_nats: Vec<T>,
    /// Max over trials and BSs of `power/budget - 1` (at most ~1e-16).
    pub power_overshoot_max: T,
    /// Max over trials of `|power/budget - 1|` at the binding BS.
    pub binding_gap_max: T,
}

impl<T: Real> RateEstimate<T> {
    /// Mean sum rate in bits.
    pub fn mean_bits(&self) -> T {
        self.mean_nats / T::of(std::f64::consts::LN_2)
    }

    /// Standard error in bits.
    pub fn std_error_bits(&self) -> T {
        self.std_error_nats / T::of(std::f64::consts::LN_2)
    }
}

/// Estimate the ergodic sum-rate `E[sum_k ln(1 + gamma_k)]` over seeded
/// independent trials.
///
/// Trial `t` uses [`trial_seed`]`(master_seed, t)`, trials may run in
/// parallel, and aggregation is in fixed trial order with compensated
/// summation, so the result is identical regardless of worker count.
pub fn ergodic_sum_rate<T: Real>(
    s: &Scenario<T>,
    alpha: T,
    trials: usize,
    master_seed: u64,
) -> Result<RateEstimate<T>> {
    if trials == 0 {
        return Err(Error::Scenario("trial count must be at least 1".into()));
    }
    let sampler = ChannelSampler::new(s)?;
    let per_trial: Vec<(T, T, T)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ch = sampler.draw(trial_seed(master_seed, t as u64));
            let ps = rzf_precoder(s, &ch, alpha)?;
            let gammas = instant_sinr(s, &ch, &ps);
            let rate = kahan_sum(gammas.iter().map(|g| (T::one() + *g).ln()));
            let mut overshoot = T::neg_infinity();
            for (i, p) in ps.powers.iter().enumerate() {
                let budget = T::of(s.n()[i] as f64) * s.rho();
                overshoot = overshoot.max(*p / budget - T::one());
            }
            let b_budget = T::of(s.n()[ps.binding_bs] as f64) * s.rho();
            let gap = (ps.powers[ps.binding_bs] / b_budget - T::one()).abs();
            Ok((rate, overshoot, gap))
        })
        .collect::<Result<_>>()?;

    let rates: Vec<T> = per_trial.iter().map(|t| t.0).collect();
    let (mean, se) = mean_and_se(&rates);
    let overshoot = per_trial
        .iter()
        .map(|t| t.1)
        .fold(T::neg_infinity(), T::max);
    let gap = per_trial.iter().map(|t| t.2).fold(T::zero(), T::max);
    Ok(RateEstimate {
        mean_nats: mean,
        std_error_nats: se,
        trials,
        per_trial_nats: rates,
        power_overshoot_max: overshoot,
        binding_gap_max: gap,
    })
}

/// Mean and standard error of one empirical-minus-deterministic residual.
#[derive(Debug, Clone, Copy)]
pub struct LemmaResidual<T> {
    pub mean: T,
    pub std_error: T,
}

/// Term-by-term validation of the asymptotic building blocks underlying the
/// deterministic SINR.
#[derive(Debug, Clone)]
pub struct LemmaReport<T> {
    pub trials: usize,
    /// Noise term: `nu - nu_bar` per trial.
    pub noise: LemmaResidual<T>,
    /// Signal term of the tracked (first) user:
    /// `Re(h^H What hhat) - u2/(1+u1)`.
    pub signal: LemmaResidual<T>,
    /// Interference power of the tracked user minus `u_k`.
    pub interference: LemmaResidual<T>,
    /// Bilinear form `x^H U A^{-1} V x` minus its deterministic limit.
    pub bilinear_xx: LemmaResidual<T>,
    /// Bilinear form `x^H U A^{-1} V v` minus its deterministic limit.
    pub bilinear_xv: LemmaResidual<T>,
}

/// Draws `x, v` with iid `CN(0, 1/N)` entries, forms
/// `A = D + (Lam x + Om v)(Lam x + Om v)^H`, and compares the bilinear forms
/// `x^H U A^{-1} V x` and `x^H U A^{-1} V v` against their deterministic
/// limits computed from `D` alone. Returns (xx residual, xv residual).
fn lemma1_stats<T: Real>(
    d: &Mat<T>,
    u: &Mat<T>,
    v: &Mat<T>,
    lam: &Mat<T>,
    om: &Mat<T>,
    draws: usize,
    master_seed: u64,
) -> Result<(LemmaResidual<T>, LemmaResidual<T>)> {
    let n = d.rows();
    let nf = T::of(n as f64);
    let d_inv = cholesky(d)?.inverse_hermitized();
    let tr = |a: &Mat<T>, b: &Mat<T>| a.matmul(b).trace_prod(&d_inv).re / nf;
    let denom = T::one() + tr(lam, &lam.herm()) + tr(om, &om.herm());
    let limit_xx = tr(v, u) - tr(lam, u) * tr(v, &lam.herm()) / denom;
    let limit_xv = -(tr(lam, u) * tr(v, &om.herm())) / denom;

    let samples: Vec<(T, T)> = (0..draws)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(master_seed, t as u64));
            rng.set_stream(LEMMA_STREAM);
            let scale = T::one() / (T::of(2.0) * nf).sqrt();
            let mut draw_vec = || -> Vec<Complex<T>> {
                (0..n)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex::new(T::of(re) * scale, T::of(im) * scale)
                    })
                    .collect()
            };
            let x = draw_vec();
            let vv = draw_vec();
            let lx = lam.mul_vec(&x);
            let ov = om.mul_vec(&vv);
            let q: Vec<Complex<T>> = lx.iter().zip(&ov).map(|(a, b)| *a + *b).collect();
            let mut a = d.clone();
            for r in 0..n {
                for c in 0..n {
                    let add = q[r] * q[c].conj();
                    let cur = a.get(r, c);
                    a.set(r, c, cur + add);
                }
            }
            a.hermitize();
            let fa = cholesky(&a)?;
            let ux = u.herm().mul_vec(&x);
            let y1 = fa.solve_vec(&v.mul_vec(&x));
            let y2 = fa.solve_vec(&v.mul_vec(&vv));
            let dot = |l: &[Complex<T>], r: &[Complex<T>]| -> Complex<T> {
                l.iter()
                    .zip(r)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                        acc + a.conj() * *b
                    })
            };
            Ok((dot(&ux, &y1).re - limit_xx, dot(&ux, &y2).re - limit_xv))
        })
        .collect::<Result<_>>()?;

    let xx: Vec<T> = samples.iter().map(|s| s.0).collect();
    let xv: Vec<T> = samples.iter().map(|s| s.1).collect();
    let (m1, s1) = mean_and_se(&xx);
    let (m2, s2) = mean_and_se(&xv);
    Ok((
        LemmaResidual {
            mean: m1,
            std_error: s1,
        },
        LemmaResidual {
            mean: m2,
            std_error: s2,
        },
    ))
}

/// Validate the asymptotic lemmas behind the deterministic SINR, term by
/// term, on `trials` seeded draws.
///
/// Reports empirical-minus-deterministic residuals for (a) the noise term
/// `nu`, (b) the tracked user's signal form, (c) the tracked user's
/// interference power, and (d) the two rank-one-update bilinear forms (the
/// latter on synthetic `x, v` with the scenario's first-user CSIT weights).
pub fn validate_appendix_terms<T: Real>(
    s: &Scenario<T>,
    alpha: T,
    trials: usize,
    master_seed: u64,
) -> Result<LemmaReport<T>> {
    if trials == 0 {
        return Err(Error::Scenario("trial count must be at least 1".into()));
    }
    if s.k() == 0 {
        return Err(Error::Scenario(
            "lemma validation needs at least one user".into(),
        ));
    }
    let fp = solve_fixed_point(s, alpha)?;
    let dc = solve_dotc(s, &fp)?;
    let det = compute_u_terms(s, &fp, &dc)?;
    let signal_limit = det.u2[0] / (T::one() + det.u1[0]);
    let interference_limit = det.uk[0];

    let sampler = ChannelSampler::new(s)?;
    let channel_samples: Vec<(T, T, T)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ch = sampler.draw(trial_seed(master_seed, t as u64));
            let ps = rzf_precoder(s, &ch, alpha)?;
            let (signals, interference) = per_user_forms(&ch, &ps);
            Ok((
                ps.nu - det.nu_bar,
                signals[0].re - signal_limit,
                interference[0] - interference_limit,
            ))
        })
        .collect::<Result<_>>()?;

    let pick = |f: fn(&(T, T, T)) -> T| -> LemmaResidual<T> {
        let v: Vec<T> = channel_samples.iter().map(f).collect();
        let (mean, std_error) = mean_and_se(&v);
        LemmaResidual { mean, std_error }
    };

    // Bilinear-form instantiation mirroring the signal-term usage: D is the
    // user-averaged regularized covariance, U = T_0^{1/2},
    // V = Lam = psi-weighted T_0^{1/2}, Om = tau-weighted T_0^{1/2}.
    let n = s.n_total();
    let mut d = Mat::zeros(n, n);
    let mut u = Mat::zeros(n, n);
    let mut lam = Mat::zeros(n, n);
    let mut om = Mat::zeros(n, n);
    let inv_k = T::one() / T::of(s.k() as f64);
    for i in 0..s.m() {
        let off = s.offset(i);
        let n_i = s.n()[i];
        let mut avg = Mat::zeros(n_i, n_i);
        for k in 0..s.k() {
            avg.add_scaled_assign(s.corr(k, i), inv_k);
        }
        let t0 = s.corr(0, i);
        let tol = T::tol_floor(1e-10, 64.0) * t0.max_abs().max(T::one());
        let sq = sqrt_psd(t0, tol)?;
        for r in 0..n_i {
            for c in 0..n_i {
                d.set(off + r, off + c, avg.get(r, c));
                u.set(off + r, off + c, sq.get(r, c));
                let sv = sq.get(r, c);
                lam.set(
                    off + r,
                    off + c,
                    Complex::new(s.psi(0, i) * sv.re, s.psi(0, i) * sv.im),
                );
                let tau = s.tau2(0, i).sqrt();
                om.set(off + r, off + c, Complex::new(tau * sv.re, tau * sv.im));
            }
        }
    }
    d.add_diag(alpha);
    let (bilinear_xx, bilinear_xv) = lemma1_stats(&d, &u, &lam, &lam, &om, trials, master_seed)?;

    Ok(LemmaReport {
        trials,
        noise: pick(|s| s.0),
        signal: pick(|s| s.1),
        interference: pick(|s| s.2),
        bilinear_xx,
        bilinear_xv,
    })
}
