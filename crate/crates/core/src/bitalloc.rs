//! Feedback-bit allocation across cooperating base stations.
//!
//! Each user spends a common budget of `B` feedback bits per coherence
//! block, split across its `M` links. Spending `B_{k,i}` bits on the link
//! to BS `i` buys CSIT quality `tau^2_{k,i} = 2^{-B_{k,i}/(N_i-1)}` (the
//! random-vector-quantization distortion bound, met with equality). This
//! module enumerates the full split set (all compositions of `B`), the
//! rank-restricted subset (splits non-increasing along each user's
//! equivalent-gain ranking), and exhaustively searches either set for the
//! split that maximizes the deterministic sum rate, re-optimizing the RZF
//! regularization parameter for every candidate.

use rayon::prelude::*;

use crate::det_sinr::det_equivalent;
use crate::error::{Error, Result};
use crate::regopt::{closed_form_alpha, default_alpha_bracket, golden_section_alpha};
use crate::rmt_core::{solve_fixed_point, FixedPointSolution};
use crate::scalar::Real;
use crate::scenario::Scenario;

/// Which candidate set [`search_allocation`] walks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchSpace {
    /// Every split of the budget into nonnegative per-BS parts.
    Full,
    /// Only splits that are non-increasing along each user's gain ranking.
    Restricted,
}

/// A per-user split of the feedback budget across base stations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitAllocation {
    /// `K x M` row-major bit counts `B_{k,i}`.
    pub bits: Vec<u32>,
    /// Common per-user total; every row of `bits` sums to it.
    pub budget: u32,
    /// Whether the split was drawn from the rank-restricted set.
    pub restricted: bool,
    /// `K x M` row-major gain ranking (BS indices, strongest link first)
    /// used to place restricted candidates.
    pub ranking: Vec<usize>,
}

/// Per-user link strengths `tr(T_{k,i} Psi_i) / N_i` under a shared
/// resolvent fixed point, with the per-user decreasing order.
#[derive(Clone, Debug)]
pub struct GainRanking<T> {
    /// `K x M` row-major equivalent channel gains.
    pub gains: Vec<T>,
    /// `K x M` row-major permutations: row `k` lists BS indices in
    /// non-increasing gain order, ties broken by lower BS index.
    pub order: Vec<usize>,
}

/// Outcome of an exhaustive [`search_allocation`] run.
#[derive(Clone, Debug)]
pub struct AllocationSearch<T> {
    /// The maximizing split.
    pub allocation: BitAllocation,
    /// Deterministic sum rate at the winner, nats per channel use.
    pub sum_rate_nats: T,
    /// Re-optimized regularization parameter at the winner.
    pub alpha_opt: T,
    /// Number of candidate splits evaluated.
    pub evaluations: usize,
}

impl<T: Real> AllocationSearch<T> {
    /// Deterministic sum rate at the winner, bits per channel use.
    pub fn sum_rate_bits(&self) -> T {
        self.sum_rate_nats / T::of(std::f64::consts::LN_2)
    }
}

/// CSIT error power bought by `bits` feedback bits on a link with `n_i`
/// transmit antennas: `2^{-bits/(n_i - 1)}`.
///
/// Zero bits leave the link at pure noise (`tau^2 = 1`); every extra bit
/// strictly shrinks the error power toward 0.
pub fn tau2_from_bits<T: Real>(bits: u32, n_i: usize) -> Result<T> {
    if n_i < 2 {
        return Err(Error::Scenario(format!(
            "quantization error exponent divides by n_i - 1; got n_i = {n_i}"
        )));
    }
    Ok((-T::of(bits as f64) / T::of((n_i - 1) as f64)).exp2())
}

/// Number of splits of `budget` into `m` nonnegative parts:
/// `C(budget + m - 1, m - 1)`.
pub fn composition_count(budget: u32, m: usize) -> u64 {
    if m == 0 {
        return u64::from(budget == 0);
    }
    let n = u64::from(budget) + m as u64 - 1;
    let k = m as u64 - 1;
    let mut acc = 1u64;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) / (j + 1);
    }
    acc
}

/// Number of splits of `budget` into at most `m` non-increasing parts (the
/// size of the rank-restricted set), via the bounded-largest-part DP on the
/// conjugate partitions.
pub fn partition_count(budget: u32, m: usize) -> u64 {
    let b = budget as usize;
    let mut dp = vec![0u64; b + 1];
    dp[0] = 1;
    for part in 1..=m {
        for total in part..=b {
            dp[total] += dp[total - part];
        }
    }
    dp[b]
}

/// All splits of `budget` into `m` nonnegative parts, in lexicographic
/// order; there are `C(budget + m - 1, m - 1)` of them.
pub fn enumerate_full(budget: u32, m: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if m == 0 {
        if budget == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    let mut cur = vec![0u32; m];
    compositions(budget, 0, &mut cur, &mut out);
    out
}

fn compositions(remaining: u32, slot: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slot + 1 == cur.len() {
        cur[slot] = remaining;
        out.push(cur.clone());
        return;
    }
    for v in 0..=remaining {
        cur[slot] = v;
        compositions(remaining - v, slot + 1, cur, out);
    }
}

/// All splits of `budget` whose parts are non-increasing along `order`
/// (`order[0]` gets the largest part). These are the partitions of
/// `budget` into at most `m` parts, placed by rank; their number does not
/// depend on `order`.
///
/// Panics if `order` is not a permutation of `0..m`.
pub fn enumerate_restricted(budget: u32, m: usize, order: &[usize]) -> Vec<Vec<u32>> {
    assert_eq!(order.len(), m, "ranking must list every BS exactly once");
    let mut seen = vec![false; m];
    for &i in order {
        assert!(
            i < m && !seen[i],
            "ranking must be a permutation of 0..{m}"
        );
        seen[i] = true;
    }
    let mut parts = Vec::new();
    let mut cur = Vec::with_capacity(m);
    partitions(budget, budget, m, &mut cur, &mut parts);
    parts
        .iter()
        .map(|p| {
            let mut v = vec![0u32; m];
            for (rank, &b) in p.iter().enumerate() {
                v[order[rank]] = b;
            }
            v
        })
        .collect()
}

fn partitions(remaining: u32, cap: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slots == 0 {
        if remaining == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for v in 0..=cap.min(remaining) {
        // Later parts cannot exceed v, so v must still cover the rest.
        if u64::from(v) * (slots as u64) < u64::from(remaining) {
            continue;
        }
        cur.push(v);
        partitions(remaining - v, v, slots - 1, cur, out);
        cur.pop();
    }
}

/// Rank every user's links by equivalent channel gain `tr(T_{k,i} Psi_i) / N_i`.
///
/// The fixed point must be solved at the regularization parameter used for
/// allocation evaluation; note it depends only on the correlation profile
/// and `alpha`, not on the CSIT error powers being allocated.
pub fn rank_links<T: Real>(s: &Scenario<T>, fp: &FixedPointSolution<T>) -> GainRanking<T> {
    let m = s.m();
    let kk = s.k();
    let mut gains = Vec::with_capacity(kk * m);
    for k in 0..kk {
        for i in 0..m {
            let tr = s.corr(k, i).trace_prod(&fp.psi[i]).re;
            gains.push(tr / T::of(s.n()[i] as f64));
        }
    }
    let mut order = Vec::with_capacity(kk * m);
    for k in 0..kk {
        let row = &gains[k * m..(k + 1) * m];
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .expect("link gain is not NaN")
                .then(a.cmp(&b))
        });
        order.extend(idx);
    }
    GainRanking { gains, order }
}

/// Balanced reference split: `budget / m` everywhere, remainder spread to
/// the lowest BS indices.
fn balanced_split(budget: u32, m: usize) -> Vec<u32> {
    let q = budget / m as u32;
    let r = (budget % m as u32) as usize;
    (0..m).map(|i| q + u32::from(i < r)).collect()
}

/// Re-optimized regularization parameter for one candidate scenario: the
/// closed form when the scenario reduces to a scaled-identity homogeneous
/// system, otherwise a coarse golden-section search.
fn candidate_alpha<T: Real>(s: &Scenario<T>) -> Result<T> {
    match closed_form_alpha(s) {
        Ok(res) => Ok(res.alpha_opt),
        Err(Error::Unsupported(_)) => {
            let res = golden_section_alpha(s, default_alpha_bracket(s), T::of(1e-4))?;
            Ok(res.alpha_opt)
        }
        Err(e) => Err(e),
    }
}

/// Scenario with the CSIT error powers implied by a `K x M` bit matrix.
fn apply_bits<T: Real>(s: &Scenario<T>, bits: &[u32]) -> Result<Scenario<T>> {
    let m = s.m();
    let mut tau2 = Vec::with_capacity(bits.len());
    for (idx, &b) in bits.iter().enumerate() {
        tau2.push(tau2_from_bits(b, s.n()[idx % m])?);
    }
    s.with_tau2(tau2)
}

/// Exhaustively search the chosen split set for the deterministic
/// sum-rate-maximizing feedback-bit allocation.
///
/// Candidates are per-user split patterns: the full set applies one
/// composition of the budget to every user in BS-index order, the
/// restricted set places one partition of the budget along each user's own
/// gain ranking (computed once, at the optimum for a balanced reference
/// split). Every candidate is scored by re-optimizing the regularization
/// parameter and evaluating the deterministic sum rate; ties are broken
/// toward the lexicographically smallest bit matrix.
pub fn search_allocation<T: Real>(
    s: &Scenario<T>,
    budget: u32,
    space: SearchSpace,
) -> Result<AllocationSearch<T>> {
    for (i, &n_i) in s.n().iter().enumerate() {
        if n_i < 2 {
            return Err(Error::Scenario(format!(
                "bit allocation needs at least 2 antennas per BS; BS {i} has {n_i}"
            )));
        }
    }
    let m = s.m();
    let kk = s.k();

    let reference: Vec<u32> = {
        let row = balanced_split(budget, m);
        (0..kk * m).map(|idx| row[idx % m]).collect()
    };
    let ref_scenario = apply_bits(s, &reference)?;
    let ref_alpha = candidate_alpha(&ref_scenario)?;
    let fp = solve_fixed_point(s, ref_alpha)?;
    let ranking = rank_links(s, &fp);

    let candidates: Vec<Vec<u32>> = match space {
        SearchSpace::Full => enumerate_full(budget, m)
            .into_iter()
            .map(|row| (0..kk * m).map(|idx| row[idx % m]).collect())
            .collect(),
        SearchSpace::Restricted => {
            let mut parts = Vec::new();
            let mut cur = Vec::with_capacity(m);
            partitions(budget, budget, m, &mut cur, &mut parts);
            parts
                .iter()
                .map(|p| {
                    let mut bits = vec![0u32; kk * m];
                    for k in 0..kk {
                        let order = &ranking.order[k * m..(k + 1) * m];
                        for (rank, &b) in p.iter().enumerate() {
                            bits[k * m + order[rank]] = b;
                        }
                    }
                    bits
                })
                .collect()
        }
    };

    let scored: Vec<(T, T)> = candidates
        .par_iter()
        .map(|bits| {
            let cand = apply_bits(s, bits)?;
            let alpha = candidate_alpha(&cand)?;
            let rate = det_equivalent(&cand, alpha)?.sum_rate_nats;
            Ok((alpha, rate))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0usize;
    for idx in 1..scored.len() {
        let (_, rate) = scored[idx];
        let (_, best_rate) = scored[best];
        if rate > best_rate || (rate == best_rate && candidates[idx] < candidates[best]) {
            best = idx;
        }
    }
    let (alpha_opt, sum_rate_nats) = scored[best];
    Ok(AllocationSearch {
        allocation: BitAllocation {
            bits: candidates[best].clone(),
            budget,
            restricted: space == SearchSpace::Restricted,
            ranking: ranking.order,
        },
        sum_rate_nats,
        alpha_opt,
        evaluations: scored.len(),
    })
}
