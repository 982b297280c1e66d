//! Compares `evaluate_pair` against the brute-force set-arithmetic
//! evaluation from `lesionbench-testkit` on randomized mask pairs.
//!
//! Counts must match exactly; the derived rates are the same closed-form
//! expressions on both sides, so they must match bit for bit too.

use lesionbench_core::conncomp::Connectivity;
use lesionbench_core::metrics::evaluate_pair;
use lesionbench_core::volume::BinaryMask;
use lesionbench_testkit::brute_force_eval;
use proptest::prelude::*;

fn connectivities() -> [Connectivity; 3] {
    [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix]
}

/// A pair of masks on a shared random grid, plus a size floor in voxels.
fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask, u32)> {
    ((1usize..=8, 1usize..=8, 1usize..=8), 0.05f64..0.6, 0.05f64..0.6, 0u32..5).prop_flat_map(
        |(dims, fill_p, fill_g, min_voxels)| {
            let n = dims.0 * dims.1 * dims.2;
            (
                proptest::collection::vec(proptest::bool::weighted(fill_p), n),
                proptest::collection::vec(proptest::bool::weighted(fill_g), n),
            )
                .prop_map(move |(pred, gt)| {
                    (
                        BinaryMask::from_bools(dims, (1.0, 1.0, 1.0), &pred).unwrap(),
                        BinaryMask::from_bools(dims, (1.0, 1.0, 1.0), &gt).unwrap(),
                        min_voxels,
                    )
                })
        },
    )
}

proptest! {
    #[test]
    fn counts_and_rates_match_the_oracle((pred, gt, min_voxels) in arb_pair()) {
        let min_mm3 = min_voxels as f64;
        for conn in connectivities() {
            let report = evaluate_pair(&pred, &gt, conn, min_mm3).unwrap();
            let oracle = brute_force_eval(
                &pred.to_bools(),
                &gt.to_bools(),
                pred.dims(),
                pred.volume().voxel_volume_mm3(),
                conn.as_u8(),
                min_mm3,
            );

            prop_assert_eq!(report.counts.pred_voxels, oracle.pred_voxels);
            prop_assert_eq!(report.counts.gt_voxels, oracle.gt_voxels);
            prop_assert_eq!(report.counts.overlap_voxels, oracle.overlap_voxels);
            prop_assert_eq!(report.counts.gt_lesions, oracle.gt_lesions);
            prop_assert_eq!(report.counts.pred_lesions, oracle.pred_lesions);
            prop_assert_eq!(report.counts.detected_lesions, oracle.detected_lesions);
            prop_assert_eq!(report.counts.false_lesions, oracle.false_lesions);

            prop_assert_eq!(report.dice, oracle.dice);
            prop_assert_eq!(report.tp_rate, oracle.tp_rate);
            prop_assert_eq!(report.ltpr, oracle.ltpr);
            prop_assert_eq!(report.lfpr, oracle.lfpr);
            prop_assert_eq!(report.vd, oracle.vd);
        }
    }

    #[test]
    fn swapping_pred_and_gt_preserves_dice((pred, gt, _min) in arb_pair()) {
        let ab = evaluate_pair(&pred, &gt, Connectivity::TwentySix, 0.0).unwrap();
        let ba = evaluate_pair(&gt, &pred, Connectivity::TwentySix, 0.0).unwrap();
        prop_assert_eq!(ab.dice, ba.dice);
        prop_assert_eq!(ab.counts.overlap_voxels, ba.counts.overlap_voxels);
    }

    #[test]
    fn self_evaluation_is_perfect((pred, _gt, _min) in arb_pair()) {
        let r = evaluate_pair(&pred, &pred, Connectivity::TwentySix, 0.0).unwrap();
        prop_assert_eq!(r.dice, 1.0);
        if r.counts.gt_lesions > 0 {
            prop_assert_eq!(r.ltpr, Some(1.0));
            prop_assert_eq!(r.lfpr, Some(0.0));
            prop_assert_eq!(r.tp_rate, Some(1.0));
            prop_assert_eq!(r.vd, Some(0.0));
        } else {
            prop_assert_eq!(r.ltpr, None);
            prop_assert_eq!(r.lfpr, None);
        }
    }
}

#[test]
fn oracle_agreement_survives_anisotropic_spacing() {
    // 1×1×2.5 mm voxels: single voxels are 2.5 mm³, so a 3 mm³ floor
    // removes isolated voxels but keeps a two-voxel component (5 mm³).
    let dims = (6, 6, 4);
    let n = 6 * 6 * 4;
    let at = |x: usize, y: usize, z: usize| x + 6 * (y + 6 * z);
    let mut pred = vec![false; n];
    let mut gt = vec![false; n];
    pred[at(0, 0, 0)] = true; // isolated: filtered out
    pred[at(3, 3, 1)] = true;
    pred[at(4, 3, 1)] = true; // pair: kept
    gt[at(3, 3, 1)] = true;
    gt[at(5, 5, 3)] = true; // isolated in gt: filtered out

    let pred_mask = BinaryMask::from_bools(dims, (1.0, 1.0, 2.5), &pred).unwrap();
    let gt_mask = BinaryMask::from_bools(dims, (1.0, 1.0, 2.5), &gt).unwrap();
    for conn in connectivities() {
        let report = evaluate_pair(&pred_mask, &gt_mask, conn, 3.0).unwrap();
        let oracle = brute_force_eval(&pred, &gt, dims, 2.5, conn.as_u8(), 3.0);
        assert_eq!(report.counts.pred_voxels, oracle.pred_voxels);
        assert_eq!(report.counts.gt_voxels, oracle.gt_voxels);
        assert_eq!(report.dice, oracle.dice);
        assert_eq!(report.ltpr, oracle.ltpr);
        assert_eq!(report.lfpr, oracle.lfpr);
    }
}
