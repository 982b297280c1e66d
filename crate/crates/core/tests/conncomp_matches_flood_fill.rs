//! Cross-checks the two-pass union-find labeling against the flood-fill
//! reference in `lesionbench-testkit`, over randomized masks and all
//! three neighborhoods.

use lesionbench_core::conncomp::{filter_min_size, label_components, to_mask, Connectivity};
use lesionbench_core::volume::BinaryMask;
use lesionbench_testkit::flood_components;
use proptest::prelude::*;

fn linear(voxel: (u32, u32, u32), dims: (usize, usize, usize)) -> usize {
    voxel.0 as usize + dims.0 * (voxel.1 as usize + dims.1 * voxel.2 as usize)
}

/// Random dims up to 9³ with an independently random fill pattern. Fill
/// rates straddle the percolation regime so both many-small-component
/// and one-giant-component masks appear.
fn arb_mask() -> impl Strategy<Value = BinaryMask> {
    ((1usize..=9, 1usize..=9, 1usize..=9), 0.05f64..0.7).prop_flat_map(|(dims, fill)| {
        let n = dims.0 * dims.1 * dims.2;
        proptest::collection::vec(proptest::bool::weighted(fill), n).prop_map(move |bools| {
            BinaryMask::from_bools(dims, (1.0, 1.0, 1.0), &bools).unwrap()
        })
    })
}

fn connectivities() -> [Connectivity; 3] {
    [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix]
}

proptest! {
    #[test]
    fn labeling_agrees_with_flood_fill(mask in arb_mask()) {
        let bools = mask.to_bools();
        for conn in connectivities() {
            let expected = flood_components(&bools, mask.dims(), conn.as_u8());
            let got = label_components(&mask, conn);

            prop_assert_eq!(got.len(), expected.len());
            for (lesion, oracle) in got.lesions.iter().zip(&expected) {
                let indices: Vec<usize> =
                    lesion.voxels.iter().map(|&v| linear(v, mask.dims())).collect();
                prop_assert_eq!(&indices, oracle);
            }
            // Ids are 1-based and follow first-voxel scan order, which is
            // exactly the oracle's component order.
            for (i, lesion) in got.lesions.iter().enumerate() {
                prop_assert_eq!(lesion.id, i as u32 + 1);
            }
        }
    }

    #[test]
    fn voxels_are_partitioned(mask in arb_mask()) {
        let ls = label_components(&mask, Connectivity::TwentySix);
        prop_assert_eq!(ls.total_voxels(), mask.count_positive());
        // No voxel may appear in two lesions.
        let mut seen = vec![false; mask.len()];
        for lesion in &ls.lesions {
            for &v in &lesion.voxels {
                let i = linear(v, mask.dims());
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
    }

    #[test]
    fn to_mask_round_trips(mask in arb_mask()) {
        for conn in connectivities() {
            let ls = label_components(&mask, conn);
            prop_assert_eq!(to_mask(&ls), mask.clone());
        }
    }

    #[test]
    fn size_filter_agrees_with_per_component_volume(mask in arb_mask(), min_voxels in 0u32..6) {
        // Unit spacing, so mm³ and voxel counts coincide.
        let min_mm3 = min_voxels as f64;
        let ls = label_components(&mask, Connectivity::TwentySix);
        let kept = filter_min_size(&ls, min_mm3).unwrap();
        let expected: Vec<&Vec<(u32, u32, u32)>> = ls
            .lesions
            .iter()
            .filter(|l| l.volume_mm3 >= min_mm3)
            .map(|l| &l.voxels)
            .collect();
        // Survivors keep their order and get renumbered 1..=n.
        prop_assert_eq!(kept.len(), expected.len());
        for (i, (lesion, voxels)) in kept.lesions.iter().zip(expected).enumerate() {
            prop_assert_eq!(lesion.id, i as u32 + 1);
            prop_assert_eq!(&lesion.voxels, voxels);
        }
    }

    #[test]
    fn six_refines_eighteen_refines_twentysix(mask in arb_mask()) {
        // A coarser neighborhood can only merge components, never split
        // them, so counts are monotone.
        let n6 = label_components(&mask, Connectivity::Six).len();
        let n18 = label_components(&mask, Connectivity::Eighteen).len();
        let n26 = label_components(&mask, Connectivity::TwentySix).len();
        prop_assert!(n6 >= n18);
        prop_assert!(n18 >= n26);
    }
}

#[test]
fn anisotropic_spacing_scales_filter_volumes() {
    // Two single-voxel lesions on a 2.0 mm z-pitch grid: each is 2 mm³,
    // so a 2 mm³ floor keeps them and a 2.5 mm³ floor drops them.
    let mut bools = vec![false; 5 * 5 * 5];
    bools[0] = true;
    bools[4 + 5 * (4 + 5 * 4)] = true;
    let mask = BinaryMask::from_bools((5, 5, 5), (1.0, 1.0, 2.0), &bools).unwrap();
    let ls = label_components(&mask, Connectivity::TwentySix);
    assert_eq!(ls.voxel_volume_mm3(), 2.0);
    assert_eq!(filter_min_size(&ls, 2.0).unwrap().len(), 2);
    assert_eq!(filter_min_size(&ls, 2.5).unwrap().len(), 0);
}
