//! Compares the exact signed-rank test against the 2ⁿ enumeration oracle
//! from `lesionbench-testkit` on randomized paired samples.
//!
//! Differences are drawn from a small integer lattice so ties, zeros, and
//! sign imbalances all occur often — exactly the cases where rank
//! averaging and zero handling can silently go wrong.

use lesionbench_core::stats::{
    wilcoxon_signed_rank_opts, WilcoxonMethod, WilcoxonOptions, ZeroPolicy,
};
use lesionbench_testkit::wilcoxon_enumerated;
use proptest::prelude::*;

/// Paired samples whose differences are multiples of 0.5 in [-3, 3].
fn arb_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    proptest::collection::vec((-6i32..=6, -40i32..=40), 1..=14).prop_map(|raw| {
        let a: Vec<f64> = raw.iter().map(|&(d, base)| base as f64 * 0.25 + d as f64 * 0.5).collect();
        let b: Vec<f64> = raw.iter().map(|&(_, base)| base as f64 * 0.25).collect();
        (a, b)
    })
}

fn opts(policy: ZeroPolicy) -> WilcoxonOptions {
    WilcoxonOptions {
        zero_policy: policy,
        // High enough that every generated sample stays on the exact path.
        exact_limit: 25,
    }
}

proptest! {
    #[test]
    fn exact_p_matches_full_enumeration_drop((a, b) in arb_pairs()) {
        let r = wilcoxon_signed_rank_opts(&a, &b, &opts(ZeroPolicy::Drop)).unwrap();
        let (n_oracle, w_oracle, p_oracle) = wilcoxon_enumerated(&a, &b, false);
        prop_assert_eq!(r.n_effective, n_oracle);
        prop_assert!((r.w - w_oracle).abs() < 1e-9);
        prop_assert!(
            (r.p_value - p_oracle).abs() < 1e-9,
            "p = {} vs oracle {}", r.p_value, p_oracle
        );
        if r.n_effective > 0 {
            prop_assert_eq!(r.method, WilcoxonMethod::Exact);
        }
    }

    #[test]
    fn exact_p_matches_full_enumeration_pratt((a, b) in arb_pairs()) {
        let r = wilcoxon_signed_rank_opts(&a, &b, &opts(ZeroPolicy::Pratt)).unwrap();
        let (n_oracle, w_oracle, p_oracle) = wilcoxon_enumerated(&a, &b, true);
        prop_assert_eq!(r.n_effective, n_oracle);
        prop_assert!((r.w - w_oracle).abs() < 1e-9);
        prop_assert!(
            (r.p_value - p_oracle).abs() < 1e-9,
            "p = {} vs oracle {}", r.p_value, p_oracle
        );
    }

    #[test]
    fn p_is_a_valid_probability_and_w_is_bounded((a, b) in arb_pairs()) {
        let r = wilcoxon_signed_rank_opts(&a, &b, &opts(ZeroPolicy::Drop)).unwrap();
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        let n = r.n_effective as f64;
        // W = min(W⁺, W⁻) can be at most half the total rank sum.
        prop_assert!(r.w <= n * (n + 1.0) / 4.0 + 1e-9);
        prop_assert!(r.w >= 0.0);
    }

    #[test]
    fn shifting_both_samples_changes_nothing((a, b) in arb_pairs(), shift in -10i32..=10) {
        // An integer shift of quarter-lattice values is exact in binary
        // floating point, so the paired differences — all the test sees —
        // are bit-identical before and after.
        let shift = shift as f64;
        let r1 = wilcoxon_signed_rank_opts(&a, &b, &opts(ZeroPolicy::Drop)).unwrap();
        let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let r2 = wilcoxon_signed_rank_opts(&a2, &b2, &opts(ZeroPolicy::Drop)).unwrap();
        prop_assert_eq!(r1, r2);
    }
}

/// Every sign pattern of a fixed five-element difference vector, checked
/// exhaustively — no randomness, no tolerance beyond float noise.
#[test]
fn all_sign_patterns_of_five_distinct_magnitudes() {
    let magnitudes = [1.0, 2.0, 3.0, 4.0, 5.0];
    for pattern in 0u32..32 {
        let a: Vec<f64> = magnitudes
            .iter()
            .enumerate()
            .map(|(i, &m)| if pattern & (1 << i) != 0 { m } else { -m })
            .collect();
        let b = vec![0.0; 5];
        let r = wilcoxon_signed_rank_opts(&a, &b, &opts(ZeroPolicy::Drop)).unwrap();
        let (n_oracle, w_oracle, p_oracle) = wilcoxon_enumerated(&a, &b, false);
        assert_eq!(r.n_effective, n_oracle);
        assert_eq!(r.w, w_oracle, "pattern {pattern:05b}");
        assert!((r.p_value - p_oracle).abs() < 1e-12, "pattern {pattern:05b}");
    }
}
