//! System-model description: cell/user dimensions, transmit SNR, spatial
//! correlation with absorbed path gains, and CSIT error powers.
//!
//! The channel convention: user k sees BS i through `h_{k,i} = T_{k,i}^{1/2}
//! x_{k,i}` with iid `CN(0, 1/N_i)` entries in `x`; the transmitter's
//! estimate mixes the true direction with independent noise, weighted by
//! `psi = sqrt(1 - tau^2)` and `tau`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, Mat};
use crate::scalar::Real;

/// Validated, immutable system description.
///
/// Correlation matrices and CSIT error powers are stored per (user, BS) in
/// row-major user order: index `k * M + i`.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    n: Vec<usize>,
    k: usize,
    rho: T,
    corr: Vec<Mat<T>>,
    tau2: Vec<T>,
    beta: Vec<T>,
    offsets: Vec<usize>,
    warnings: Vec<String>,
}

impl<T: Real> Scenario<T> {
    /// Validates and builds a scenario.
    ///
    /// `corr` and `tau2` are indexed `k * M + i` with `M = n.len()`.
    /// Correlation matrices are symmetrized (`(T + T^H)/2`) after the
    /// Hermiticity check, then spectrum-checked for nonnegative
    /// definiteness. `K = 0` is accepted as a degenerate scenario (useful
    /// for resolvent baselines); config-driven construction rejects it.
    pub fn new(n: Vec<usize>, k: usize, rho: T, corr: Vec<Mat<T>>, tau2: Vec<T>) -> Result<Self> {
        let m = n.len();
        if m == 0 {
            return Err(Error::Scenario("at least one BS required".into()));
        }
        if n.iter().any(|&ni| ni == 0) {
            return Err(Error::Scenario("every N_i must be >= 1".into()));
        }
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::Scenario(format!("rho must be positive and finite, got {rho}")));
        }
        if corr.len() != k * m {
            return Err(Error::Dimension(format!(
                "expected {} correlation matrices (K*M), got {}",
                k * m,
                corr.len()
            )));
        }
        if tau2.len() != k * m {
            return Err(Error::Dimension(format!(
                "expected {} tau^2 entries (K*M), got {}",
                k * m,
                tau2.len()
            )));
        }
        for (idx, t2) in tau2.iter().enumerate() {
            if !(*t2 >= T::zero() && *t2 <= T::one()) {
                return Err(Error::Scenario(format!(
                    "tau^2 outside [0,1] at user {}, BS {}: {}",
                    idx / m,
                    idx % m,
                    t2
                )));
            }
        }

        let mut warnings = Vec::new();
        let mut stored = Vec::with_capacity(corr.len());
        for (idx, t) in corr.into_iter().enumerate() {
            let (user, bs) = (idx / m, idx % m);
            if t.rows() != n[bs] || t.cols() != n[bs] {
                return Err(Error::Dimension(format!(
                    "correlation matrix for user {user}, BS {bs} is {}x{}, expected {}x{}",
                    t.rows(),
                    t.cols(),
                    n[bs],
                    n[bs]
                )));
            }
            let scale = t.max_abs().max(T::one());
            let herm_tol = T::tol_floor(1e-12, 16.0) * scale;
            if t.herm_defect() > herm_tol {
                return Err(Error::Scenario(format!(
                    "non-Hermitian correlation matrix at user {user}, BS {bs} (defect {:.3e})",
                    t.herm_defect().as_f64()
                )));
            }
            let mut t = t;
            t.hermitize();
            if t.is_zero() {
                warnings.push(format!(
                    "correlation for user {user}, BS {bs} is identically zero (dead link)"
                ));
            } else {
                let eig_tol = T::tol_floor(1e-10, 64.0) * scale;
                let dec = eigh(&t)?;
                if dec.values[0] < -eig_tol {
                    return Err(Error::Scenario(format!(
                        "indefinite correlation matrix at user {user}, BS {bs} (eigenvalue {:.3e})",
                        dec.values[0].as_f64()
                    )));
                }
            }
            stored.push(t);
        }

        let beta = n
            .iter()
            .map(|&ni| {
                if k == 0 {
                    T::infinity()
                } else {
                    T::of(ni as f64) / T::of(k as f64)
                }
            })
            .collect();
        let mut offsets = Vec::with_capacity(m + 1);
        let mut acc = 0;
        for &ni in &n {
            offsets.push(acc);
            acc += ni;
        }
        offsets.push(acc);

        Ok(Self {
            n,
            k,
            rho,
            corr: stored,
            tau2,
            beta,
            offsets,
            warnings,
        })
    }

    /// Cell count M.
    pub fn m(&self) -> usize {
        self.n.len()
    }

    /// User count K.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Per-BS antenna counts.
    pub fn n(&self) -> &[usize] {
        &self.n
    }

    /// Total antennas N.
    pub fn n_total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Antenna index where BS i's block starts.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Linear transmit SNR rho = P / sigma^2.
    pub fn rho(&self) -> T {
        self.rho
    }

    /// Load ratio beta_i = N_i / K (infinite when K = 0).
    pub fn beta(&self, i: usize) -> T {
        self.beta[i]
    }

    /// Correlation matrix T_{k,i}.
    pub fn corr(&self, k: usize, i: usize) -> &Mat<T> {
        &self.corr[k * self.m() + i]
    }

    /// CSIT error power tau^2_{k,i}.
    pub fn tau2(&self, k: usize, i: usize) -> T {
        self.tau2[k * self.m() + i]
    }

    /// Estimate weight psi_{k,i} = sqrt(1 - tau^2_{k,i}).
    pub fn psi(&self, k: usize, i: usize) -> T {
        (T::one() - self.tau2(k, i)).sqrt()
    }

    /// True if every tau^2 is exactly zero (perfect CSIT).
    pub fn perfect_csit(&self) -> bool {
        self.tau2.iter().all(|t| *t == T::zero())
    }

    /// Non-fatal observations from construction (dead links and the like).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Exact user symmetry: all users share bitwise-identical correlation
    /// matrices and tau^2 rows. Enables collapsing per-user searches.
    pub fn user_symmetric(&self) -> bool {
        let m = self.m();
        (1..self.k).all(|k| {
            (0..m).all(|i| {
                self.corr[k * m + i] == self.corr[i] && self.tau2[k * m + i] == self.tau2[i]
            })
        })
    }

    /// Clone with replaced CSIT error powers (same dimensions required).
    pub fn with_tau2(&self, tau2: Vec<T>) -> Result<Self> {
        if tau2.len() != self.tau2.len() {
            return Err(Error::Dimension(format!(
                "with_tau2: expected {} entries, got {}",
                self.tau2.len(),
                tau2.len()
            )));
        }
        for t2 in &tau2 {
            if !(*t2 >= T::zero() && *t2 <= T::one()) {
                return Err(Error::Scenario(format!("tau^2 outside [0,1]: {t2}")));
            }
        }
        let mut s = self.clone();
        s.tau2 = tau2;
        Ok(s)
    }

    /// Clone with a replaced transmit SNR (for sweeps over a fixed layout).
    pub fn with_rho(&self, rho: T) -> Result<Self> {
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::Scenario(format!(
                "rho must be positive and finite, got {rho}"
            )));
        }
        let mut s = self.clone();
        s.rho = rho;
        Ok(s)
    }

    /// Per-user CSIT mixing weights.
    pub fn csit(&self) -> CsitDecomposition<T> {
        let m = self.m();
        let n_total = self.n_total();
        let psi: Vec<T> = self.tau2.iter().map(|t2| (T::one() - *t2).sqrt()).collect();
        let mut lambda_diag = Vec::with_capacity(self.k);
        let mut omega_diag = Vec::with_capacity(self.k);
        for k in 0..self.k {
            let mut lam = Vec::with_capacity(n_total);
            let mut om = Vec::with_capacity(n_total);
            for i in 0..m {
                let p = psi[k * m + i];
                let t = self.tau2[k * m + i].sqrt();
                for _ in 0..self.n[i] {
                    lam.push(p);
                    om.push(t);
                }
            }
            lambda_diag.push(lam);
            omega_diag.push(om);
        }
        CsitDecomposition {
            psi,
            lambda_diag,
            omega_diag,
        }
    }

    /// Serializes to the config schema with explicit matrices; rebuilding
    /// from the result reproduces the scenario bit-exactly.
    pub fn to_config(&self) -> ScenarioConfig {
        let m = self.m();
        let corr = (0..self.k)
            .map(|k| {
                (0..m)
                    .map(|i| {
                        let t = self.corr(k, i);
                        let data = (0..t.rows())
                            .map(|r| {
                                (0..t.cols())
                                    .map(|c| {
                                        let v = t.get(r, c);
                                        MatrixEntry::Complex([v.re.as_f64(), v.im.as_f64()])
                                    })
                                    .collect()
                            })
                            .collect();
                        CorrKind::Matrix { data }
                    })
                    .collect()
            })
            .collect();
        let tau2 = (0..self.k)
            .map(|k| (0..m).map(|i| self.tau2(k, i).as_f64()).collect())
            .collect();
        ScenarioConfig {
            m,
            n: UsizeOrVec::PerBs(self.n.clone()),
            k: self.k,
            snr_db: None,
            rho: Some(self.rho.as_f64()),
            correlation: CorrelationConfig::PerLink(corr),
            tau2: Tau2Config::PerLink(tau2),
            seed: None,
        }
    }
}

/// CSIT mixing weights expanded per user: `psi` per (user, BS) plus the
/// length-N block-diagonal weight vectors used by the estimate model and
/// the lemma validators.
#[derive(Clone, Debug)]
pub struct CsitDecomposition<T> {
    /// psi_{k,i} = sqrt(1 - tau^2_{k,i}), indexed k*M + i.
    pub psi: Vec<T>,
    /// Per user: psi_{k,i} repeated N_i times along the antenna axis.
    pub lambda_diag: Vec<Vec<T>>,
    /// Per user: tau_{k,i} repeated N_i times along the antenna axis.
    pub omega_diag: Vec<Vec<T>>,
}

/// Exponential correlation model `gain * r^|j-l|`: Hermitian, positive
/// definite for r < 1, trace exactly `n * gain`.
pub fn exp_correlation<T: Real>(n: usize, r: T, gain: T) -> Result<Mat<T>> {
    if !(r >= T::zero() && r < T::one()) {
        return Err(Error::Scenario(format!("correlation coefficient outside [0,1): {r}")));
    }
    if !(gain > T::zero()) {
        return Err(Error::Scenario(format!("path gain must be positive: {gain}")));
    }
    Ok(Mat::from_fn(n, n, |i, j| {
        let d = if i >= j { i - j } else { j - i };
        Complex::new(gain * r.powi(d as i32), T::zero())
    }))
}

/// Scales a correlation matrix by a path gain; `gain = 0` produces the
/// degenerate dead-link matrix (valid, flagged downstream).
pub fn scale_path_gain<T: Real>(t: &Mat<T>, gain: T) -> Result<Mat<T>> {
    if !(gain >= T::zero()) || !gain.is_finite() {
        return Err(Error::Scenario(format!("path gain must be finite and >= 0: {gain}")));
    }
    Ok(t.scale(gain))
}

// ---------------------------------------------------------------------------
// Config schema (JSON)
// ---------------------------------------------------------------------------

/// One correlation-matrix generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrKind {
    /// `gain * I`.
    Identity {
        #[serde(default = "one")]
        gain: f64,
    },
    /// Exponential model `gain * r^|j-l|`.
    Exp {
        r: f64,
        #[serde(default = "one")]
        gain: f64,
    },
    /// Explicit matrix; entries are numbers (real) or `[re, im]` pairs.
    Matrix { data: Vec<Vec<MatrixEntry>> },
}

fn one() -> f64 {
    1.0
}

/// A matrix entry in config files: plain real or `[re, im]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntry {
    Real(f64),
    Complex([f64; 2]),
}

impl MatrixEntry {
    fn to_complex<T: Real>(&self) -> Complex<T> {
        match self {
            MatrixEntry::Real(re) => Complex::new(T::of(*re), T::zero()),
            MatrixEntry::Complex([re, im]) => Complex::new(T::of(*re), T::of(*im)),
        }
    }
}

/// Correlation section: one generator for every link, one per BS, or a full
/// K x M grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationConfig {
    Shared(CorrKind),
    PerBs(Vec<CorrKind>),
    PerLink(Vec<Vec<CorrKind>>),
}

/// CSIT section: scalar, per-BS, full grid, or uniform random draws (for
/// convergence-study sweeps; requires a config seed).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tau2Config {
    Random(RandomTau2),
    Scalar(f64),
    PerBs(Vec<f64>),
    PerLink(Vec<Vec<f64>>),
}

/// `{"kind": "uniform_random"}`, optionally with an upper bound `max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomTau2 {
    pub kind: String,
    #[serde(default = "one")]
    pub max: f64,
}

/// Antenna counts: one value for all BSs or explicit per-BS list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UsizeOrVec {
    One(usize),
    PerBs(Vec<usize>),
}

/// JSON scenario description. Exactly one of `snr_db` / `rho` must be set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: UsizeOrVec,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub correlation: CorrelationConfig,
    pub tau2: Tau2Config,
    /// Required only when `tau2` uses random draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Stream id for config-driven random tau^2 draws (see the Monte-Carlo
/// module for the full stream map).
const TAU2_STREAM: u64 = 0x7461_7532; // "tau2"

/// Builds a validated scenario from a config document.
///
/// Unlike [`Scenario::new`], this path enforces `K >= 1` (a simulation
/// scenario without users is a config mistake).
pub fn build_scenario<T: Real>(config: &ScenarioConfig) -> Result<Scenario<T>> {
    if config.m == 0 {
        return Err(Error::Scenario("M must be >= 1".into()));
    }
    if config.k == 0 {
        return Err(Error::Scenario("K must be >= 1".into()));
    }
    let n: Vec<usize> = match &config.n {
        UsizeOrVec::One(v) => vec![*v; config.m],
        UsizeOrVec::PerBs(v) => {
            if v.len() != config.m {
                return Err(Error::Dimension(format!(
                    "N has {} entries but M = {}",
                    v.len(),
                    config.m
                )));
            }
            v.clone()
        }
    };
    let rho = match (config.snr_db, config.rho) {
        (Some(_), Some(_)) => {
            return Err(Error::Scenario("specify snr_db or rho, not both".into()))
        }
        (Some(db), None) => T::of(10f64.powf(db / 10.0)),
        (None, Some(rho)) => T::of(rho),
        (None, None) => return Err(Error::Scenario("one of snr_db or rho is required".into())),
    };

    let kind_for = |k: usize, i: usize| -> Result<&CorrKind> {
        match &config.correlation {
            CorrelationConfig::Shared(kind) => Ok(kind),
            CorrelationConfig::PerBs(v) => v.get(i).ok_or_else(|| {
                Error::Dimension(format!("correlation list has {} entries but M = {}", v.len(), config.m))
            }),
            CorrelationConfig::PerLink(grid) => grid
                .get(k)
                .and_then(|row| row.get(i))
                .ok_or_else(|| Error::Dimension("correlation grid smaller than K x M".into())),
        }
    };
    let mut corr = Vec::with_capacity(config.k * config.m);
    for k in 0..config.k {
        for i in 0..config.m {
            let mat = match kind_for(k, i)? {
                CorrKind::Identity { gain } => {
                    if *gain < 0.0 {
                        return Err(Error::Scenario(format!("identity gain must be >= 0: {gain}")));
                    }
                    Mat::identity(n[i]).scale(T::of(*gain))
                }
                CorrKind::Exp { r, gain } => exp_correlation(n[i], T::of(*r), T::of(*gain))?,
                CorrKind::Matrix { data } => {
                    if data.len() != n[i] || data.iter().any(|row| row.len() != n[i]) {
                        return Err(Error::Dimension(format!(
                            "explicit matrix for user {k}, BS {i} must be {0}x{0}",
                            n[i]
                        )));
                    }
                    Mat::from_fn(n[i], n[i], |r, c| data[r][c].to_complex())
                }
            };
            corr.push(mat);
        }
    }

    let tau2: Vec<T> = match &config.tau2 {
        Tau2Config::Scalar(v) => vec![T::of(*v); config.k * config.m],
        Tau2Config::PerBs(v) => {
            if v.len() != config.m {
                return Err(Error::Dimension(format!(
                    "tau2 list has {} entries but M = {}",
                    v.len(),
                    config.m
                )));
            }
            (0..config.k)
                .flat_map(|_| v.iter().map(|x| T::of(*x)))
                .collect()
        }
        Tau2Config::PerLink(grid) => {
            if grid.len() != config.k || grid.iter().any(|row| row.len() != config.m) {
                return Err(Error::Dimension("tau2 grid must be K x M".into()));
            }
            grid.iter().flatten().map(|x| T::of(*x)).collect()
        }
        Tau2Config::Random(spec) => {
            if spec.kind != "uniform_random" {
                return Err(Error::Scenario(format!("unknown tau2 kind: {}", spec.kind)));
            }
            if !(spec.max > 0.0 && spec.max <= 1.0) {
                return Err(Error::Scenario(format!("tau2 random max outside (0,1]: {}", spec.max)));
            }
            let seed = config.seed.ok_or_else(|| {
                Error::Scenario("tau2 uniform_random requires a config seed".into())
            })?;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(TAU2_STREAM);
            (0..config.k * config.m)
                .map(|_| T::of(rng.gen::<f64>() * spec.max))
                .collect()
        }
    };

    Scenario::new(n, config.k, rho, corr, tau2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity_scenario(m: usize, ni: usize, k: usize, rho: f64, tau2: f64) -> Scenario<f64> {
        let corr = vec![Mat::identity(ni); k * m];
        Scenario::new(vec![ni; m], k, rho, corr, vec![tau2; k * m]).unwrap()
    }

    #[test]
    fn single_cell_identity_scenario_is_valid() {
        let s = identity_scenario(1, 4, 4, 10.0, 0.0);
        assert_eq!(s.beta(0), 1.0);
        assert_eq!(s.n_total(), 4);
        assert!(s.perfect_csit());
        assert!(s.user_symmetric());
    }

    #[test]
    fn four_cell_grid_scenario_matches_expected_shape() {
        // M=4, N_i=8, K=32, T=I: the headline agreement geometry.
        let s = identity_scenario(4, 8, 32, 10.0, 0.1);
        assert_eq!(s.m(), 4);
        assert_eq!(s.n_total(), 32);
        assert_eq!(s.beta(2), 0.25);
        assert_eq!(s.offset(3), 24);
        for k in 0..32 {
            for i in 0..4 {
                assert_eq!(s.tau2(k, i), 0.1);
            }
        }
    }

    #[test]
    fn indefinite_correlation_is_rejected() {
        let mut bad = Mat::<f64>::identity(3);
        bad.set(0, 0, Complex::new(-0.5, 0.0));
        let corr = vec![bad, Mat::identity(3), Mat::identity(3), Mat::identity(3)];
        let err = Scenario::new(vec![3], 4, 1.0, corr, vec![0.0; 4]).unwrap_err();
        assert!(err.to_string().contains("indefinite"));
    }

    #[test]
    fn non_hermitian_correlation_is_rejected() {
        let mut bad = Mat::<f64>::identity(2);
        bad.set(0, 1, Complex::new(0.5, 0.0)); // asymmetric: (1,0) stays 0
        let err = Scenario::new(vec![2], 1, 1.0, vec![bad], vec![0.0]).unwrap_err();
        assert!(err.to_string().contains("non-Hermitian"));
    }

    #[test]
    fn tau2_bounds_are_enforced() {
        let corr = vec![Mat::<f64>::identity(2)];
        assert!(Scenario::new(vec![2], 1, 1.0, corr.clone(), vec![1.2]).is_err());
        assert!(Scenario::new(vec![2], 1, 1.0, corr, vec![-0.1]).is_err());
    }

    #[test]
    fn dead_link_warns_but_validates() {
        let corr = vec![Mat::<f64>::zeros(2, 2), Mat::identity(3)];
        let s = Scenario::new(vec![2, 3], 1, 1.0, corr, vec![0.0, 0.0]).unwrap();
        assert_eq!(s.warnings().len(), 1);
        assert!(s.warnings()[0].contains("dead link"));
    }

    #[test]
    fn psi_tau_decomposition_is_exact() {
        let s = identity_scenario(2, 4, 3, 5.0, 0.3);
        let csit = s.csit();
        for k in 0..3 {
            for i in 0..2 {
                let psi2 = csit.psi[k * 2 + i] * csit.psi[k * 2 + i];
                assert_relative_eq!(psi2 + s.tau2(k, i), 1.0, epsilon = 1e-14);
            }
            assert_eq!(csit.lambda_diag[k].len(), 8);
            assert_eq!(csit.omega_diag[k].len(), 8);
        }
    }

    #[test]
    fn exp_correlation_direct_formula() {
        let t = exp_correlation::<f64>(3, 0.5, 1.0).unwrap();
        let expect = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.get(i, j).re, expect[i][j]);
                assert_eq!(t.get(i, j).im, 0.0);
            }
        }
        // r = 0 gives the identity.
        let t0 = exp_correlation::<f64>(2, 0.0, 1.0).unwrap();
        assert!(t0.sub(&Mat::identity(2)).max_abs() == 0.0);
    }

    #[test]
    fn exp_correlation_spectrum_and_trace() {
        // (n=4, r=0.9, gain=2): trace exactly 8, smallest eigenvalue > 0
        // (frozen oracle: 0.12272394).
        let t = exp_correlation::<f64>(4, 0.9, 2.0).unwrap();
        assert_relative_eq!(t.trace().re, 8.0, epsilon = 1e-14);
        let dec = eigh(&t).unwrap();
        assert!(dec.values[0] > 0.0);
        assert_relative_eq!(dec.values[0], 0.122723943965593, epsilon = 1e-10);
        // Positive definite: Cholesky must succeed.
        assert!(crate::linalg::cholesky(&t).is_ok());
    }

    #[test]
    fn exp_correlation_rejects_bad_r() {
        assert!(exp_correlation::<f64>(3, 1.0, 1.0).is_err());
        assert!(exp_correlation::<f64>(3, -0.1, 1.0).is_err());
    }

    #[test]
    fn scale_path_gain_scales_and_handles_zero() {
        let t = exp_correlation::<f64>(4, 0.3, 1.0).unwrap();
        let scaled = scale_path_gain(&t, 0.0125).unwrap();
        assert_relative_eq!(scaled.trace().re, 4.0 * 0.0125, epsilon = 1e-15);
        let same = scale_path_gain(&t, 1.0).unwrap();
        assert_eq!(same, t);
        let zero = scale_path_gain(&t, 0.0).unwrap();
        assert!(zero.is_zero());
    }

    #[test]
    fn config_roundtrip_is_bit_exact() {
        let t12 = exp_correlation::<f64>(3, 0.6, 1.7).unwrap();
        let corr = vec![
            Mat::identity(2),
            t12.clone(),
            Mat::identity(2).scale(0.5),
            t12,
        ];
        let s = Scenario::new(vec![2, 3], 2, 3.7, corr, vec![0.0, 0.25, 0.5, 0.125]).unwrap();
        let json = s.to_config().to_json().unwrap();
        let rebuilt: Scenario<f64> = build_scenario(&ScenarioConfig::from_json(&json).unwrap()).unwrap();
        assert_eq!(rebuilt.k(), s.k());
        assert_eq!(rebuilt.rho(), s.rho());
        for k in 0..2 {
            for i in 0..2 {
                assert_eq!(rebuilt.tau2(k, i), s.tau2(k, i));
                assert_eq!(rebuilt.corr(k, i), s.corr(k, i));
            }
        }
    }

    #[test]
    fn config_snr_db_converts_to_linear() {
        let json = r#"{
            "M": 2, "N": 4, "K": 4, "snr_db": 20.0,
            "correlation": {"kind": "identity"},
            "tau2": 0.1
        }"#;
        let s: Scenario<f64> = build_scenario(&ScenarioConfig::from_json(json).unwrap()).unwrap();
        assert_relative_eq!(s.rho(), 100.0, epsilon = 1e-12);
        assert_eq!(s.n(), &[4, 4]);
    }

    #[test]
    fn config_per_bs_and_grid_tau2() {
        let json = r#"{
            "M": 2, "N": [2, 3], "K": 2, "rho": 1.0,
            "correlation": [{"kind": "identity"}, {"kind": "exp", "r": 0.5, "gain": 2.0}],
            "tau2": [[0.0, 0.1], [0.2, 0.3]]
        }"#;
        let s: Scenario<f64> = build_scenario(&ScenarioConfig::from_json(json).unwrap()).unwrap();
        assert_eq!(s.tau2(1, 0), 0.2);
        assert_eq!(s.tau2(0, 1), 0.1);
        assert_relative_eq!(s.corr(1, 1).trace().re, 6.0, epsilon = 1e-14);
    }

    #[test]
    fn config_random_tau2_is_seed_deterministic() {
        let json = r#"{
            "M": 2, "N": 4, "K": 3, "rho": 1.0,
            "correlation": {"kind": "identity"},
            "tau2": {"kind": "uniform_random"},
            "seed": 7
        }"#;
        let a: Scenario<f64> = build_scenario(&ScenarioConfig::from_json(json).unwrap()).unwrap();
        let b: Scenario<f64> = build_scenario(&ScenarioConfig::from_json(json).unwrap()).unwrap();
        for k in 0..3 {
            for i in 0..2 {
                assert_eq!(a.tau2(k, i), b.tau2(k, i));
                assert!(a.tau2(k, i) >= 0.0 && a.tau2(k, i) <= 1.0);
            }
        }
        // Missing seed is an error.
        let no_seed = r#"{
            "M": 2, "N": 4, "K": 3, "rho": 1.0,
            "correlation": {"kind": "identity"},
            "tau2": {"kind": "uniform_random"}
        }"#;
        assert!(build_scenario::<f64>(&ScenarioConfig::from_json(no_seed).unwrap()).is_err());
    }

    #[test]
    fn config_rejects_contradictory_snr() {
        let json = r#"{
            "M": 1, "N": 2, "K": 1, "rho": 1.0, "snr_db": 0.0,
            "correlation": {"kind": "identity"},
            "tau2": 0.0
        }"#;
        assert!(build_scenario::<f64>(&ScenarioConfig::from_json(json).unwrap()).is_err());
    }

    #[test]
    fn config_rejects_zero_users() {
        let json = r#"{
            "M": 1, "N": 2, "K": 0, "rho": 1.0,
            "correlation": {"kind": "identity"},
            "tau2": 0.0
        }"#;
        assert!(build_scenario::<f64>(&ScenarioConfig::from_json(json).unwrap()).is_err());
        // ...but the programmatic constructor accepts the degenerate case.
        assert!(Scenario::<f64>::new(vec![2], 0, 1.0, vec![], vec![]).is_ok());
    }
}
