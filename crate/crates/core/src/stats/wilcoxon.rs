//! Paired Wilcoxon signed-rank test with an exact small-sample p-value.
//!
//! For cohort sizes typical of segmentation studies the exact null
//! distribution is affordable, so up to [`WilcoxonOptions::exact_limit`]
//! effective pairs the two-sided p comes from full enumeration of sign
//! assignments (as a subset-sum count, not a 2ⁿ loop). Larger samples use
//! the normal approximation with continuity correction; computing the
//! variance as Σrᵢ²/4 over the actual (average) ranks folds the classic
//! tie correction in for free.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// What to do with zero differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroPolicy {
    /// Classic Wilcoxon: zeros are discarded before ranking.
    #[default]
    Drop,
    /// Pratt: zeros participate in ranking, then leave the rank sums.
    Pratt,
}

/// How the p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WilcoxonMethod {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "normal-approx")]
    NormalApprox,
}

#[derive(Debug, Clone)]
pub struct WilcoxonOptions {
    pub zero_policy: ZeroPolicy,
    /// Largest effective n for which the exact distribution is enumerated.
    pub exact_limit: usize,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        WilcoxonOptions {
            zero_policy: ZeroPolicy::Drop,
            exact_limit: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs remaining after zero-difference handling.
    pub n_effective: usize,
    /// W = min(W⁺, W⁻) over signed ranks.
    pub w: f64,
    /// Two-sided p-value in (0, 1].
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

impl WilcoxonResult {
    /// True when every paired difference was zero — no signal to test.
    /// Reported with p = 1.0 rather than as an error so cohort pipelines
    /// can keep going; front-ends should surface a diagnostic.
    pub fn is_degenerate(&self) -> bool {
        self.n_effective == 0
    }
}

/// Two-sided paired test of `a` versus `b` with default options
/// (zeros dropped, exact p up to n = 25).
///
/// # Errors
///
/// `insufficient-data` when lengths differ or are zero;
/// `invariant-violation` on non-finite samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_opts(a, b, &WilcoxonOptions::default())
}

/// [`wilcoxon_signed_rank`] with explicit zero handling and exact-p cutoff.
pub fn wilcoxon_signed_rank_opts(
    a: &[f64],
    b: &[f64],
    opts: &WilcoxonOptions,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InsufficientData(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InsufficientData(
            "paired test needs at least one pair".to_string(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvariantViolation(
            "paired differences must be finite".to_string(),
        ));
    }

    // Rank |d|, averaging ties; under Pratt the zeros take part in the
    // ranking before their ranks are discarded from the sums.
    let ranked: Vec<f64> = match opts.zero_policy {
        ZeroPolicy::Drop => diffs.iter().copied().filter(|d| *d != 0.0).collect(),
        ZeroPolicy::Pratt => diffs.clone(),
    };
    let n_effective = ranked.iter().filter(|d| **d != 0.0).count();
    if n_effective == 0 {
        return Ok(WilcoxonResult {
            n_effective: 0,
            w: 0.0,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
        });
    }

    let ranks = average_ranks(&ranked);
    let mut w_pos = 0.0;
    let mut w_neg = 0.0;
    let mut kept_ranks = Vec::with_capacity(n_effective);
    for (d, r) in ranked.iter().zip(&ranks) {
        if *d > 0.0 {
            w_pos += r;
            kept_ranks.push(*r);
        } else if *d < 0.0 {
            w_neg += r;
            kept_ranks.push(*r);
        }
    }
    let w = w_pos.min(w_neg);

    let (p_value, method) = if n_effective <= opts.exact_limit {
        (exact_two_sided_p(&kept_ranks, w), WilcoxonMethod::Exact)
    } else {
        (normal_two_sided_p(&kept_ranks, w), WilcoxonMethod::NormalApprox)
    };

    Ok(WilcoxonResult {
        n_effective,
        w,
        p_value,
        method,
    })
}

/// 1-based ranks of |values|, ties replaced by the run's average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .abs()
            .partial_cmp(&values[j].abs())
            .expect("finiteness checked by caller")
    });
    let mut ranks = vec![0.0; values.len()];
    let mut pos = 0;
    while pos < order.len() {
        let mut end = pos + 1;
        while end < order.len() && values[order[end]].abs() == values[order[pos]].abs() {
            end += 1;
        }
        // Positions pos..end hold ranks pos+1 ..= end; their average is
        // (pos + 1 + end) / 2.
        let avg = (pos + 1 + end) as f64 / 2.0;
        for &idx in &order[pos..end] {
            ranks[idx] = avg;
        }
        pos = end;
    }
    ranks
}

/// Exact two-sided p = min(1, 2·P(W⁻ ≤ w)) under the null where each rank
/// joins W⁻ independently with probability ½. Average ranks are always
/// multiples of ½, so doubling them gives an integer subset-sum problem.
fn exact_two_sided_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments whose doubled negative-rank
    // sum is exactly s. u64 is ample: the grand total is 2^n ≤ 2^25.
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let cutoff = (2.0 * w).round() as usize;
    let at_or_below: u64 = counts[..=cutoff.min(total)].iter().sum();
    let p = 2.0 * at_or_below as f64 / (1u64 << ranks.len()) as f64;
    p.min(1.0)
}

/// Normal approximation with continuity correction. W = min(W⁺, W⁻) never
/// exceeds the mean, so the correction always moves +½ toward it.
fn normal_two_sided_p(ranks: &[f64], w: f64) -> f64 {
    let total: f64 = ranks.iter().sum();
    let mean = total / 2.0;
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    let z = (w - mean + 0.5) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.cdf(z)).min(1.0)
}
