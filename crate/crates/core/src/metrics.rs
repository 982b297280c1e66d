//! Pair-wise evaluation metrics for one (prediction, ground-truth) mask
//! pair: Dice overlap, voxel-wise true-positive rate, lesion-wise
//! true/false-positive rates, and relative volume difference.
//!
//! Every rate with a potentially-zero denominator is reported as
//! `Option<f64>` rather than NaN: during ROC sweeps near threshold 1 the
//! prediction is routinely empty, and aggregation code must be able to
//! tell "no lesions to get wrong" apart from "scored zero". The integer
//! tallies behind the rates live in [`PairCounts`] so the same arithmetic
//! ([`MetricsReport::from_counts`]) serves both mask evaluation and
//! manifest-driven oracle checks — when the counts agree, the derived
//! floats agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::conncomp::{filter_min_size, label_components, Connectivity, LesionSet};
use crate::error::{Error, Result};
use crate::volume::BinaryMask;

/// Which side(s) of the pair the minimum-lesion-size filter touches.
///
/// Symmetric filtering is the default: it keeps the LTPR and LFPR
/// denominators consistent with what a reader of the filtered masks would
/// count. One-sided variants exist because some challenge protocols
/// filter predictions only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterSide {
    #[default]
    Both,
    GtOnly,
    PredOnly,
}

/// Integer tallies for one evaluated pair, after size filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub pred_voxels: u64,
    pub gt_voxels: u64,
    pub overlap_voxels: u64,
    pub gt_lesions: u64,
    pub pred_lesions: u64,
    /// Ground-truth lesions with at least one predicted-positive voxel.
    pub detected_lesions: u64,
    /// Predicted lesions sharing zero voxels with the ground truth.
    pub false_lesions: u64,
}

/// The five evaluation metrics plus the counts and physical volumes they
/// were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// 2|P∩G| / (|P|+|G|); 1.0 when both masks are empty.
    pub dice: f64,
    /// |P∩G| / |G|; `None` when the ground truth is empty.
    pub tp_rate: Option<f64>,
    /// detected / gt lesions; `None` when the ground truth has no lesions.
    pub ltpr: Option<f64>,
    /// false / predicted lesions; `None` when the prediction has no lesions.
    pub lfpr: Option<f64>,
    /// |vol(P) − vol(G)| / vol(G); `None` when the ground truth is empty.
    pub vd: Option<f64>,
    pub pred_volume_mm3: f64,
    pub gt_volume_mm3: f64,
    pub counts: PairCounts,
}

impl MetricsReport {
    /// Derives every metric from integer tallies. This is the only place
    /// the formulas live; callers that can produce trustworthy counts by
    /// other means (e.g. a phantom manifest) get bit-identical reports.
    pub fn from_counts(counts: PairCounts, voxel_volume_mm3: f64) -> MetricsReport {
        let p = counts.pred_voxels as f64;
        let g = counts.gt_voxels as f64;
        let o = counts.overlap_voxels as f64;
        let dice = if counts.pred_voxels + counts.gt_voxels == 0 {
            1.0
        } else {
            2.0 * o / (p + g)
        };
        let tp_rate = (counts.gt_voxels > 0).then(|| o / g);
        let ltpr = (counts.gt_lesions > 0)
            .then(|| counts.detected_lesions as f64 / counts.gt_lesions as f64);
        let lfpr = (counts.pred_lesions > 0)
            .then(|| counts.false_lesions as f64 / counts.pred_lesions as f64);
        // The voxel volume cancels out of |vol(P)−vol(G)|/vol(G), so the
        // ratio is computed on counts to avoid needless rounding.
        let vd = (counts.gt_voxels > 0).then(|| (p - g).abs() / g);
        MetricsReport {
            dice,
            tp_rate,
            ltpr,
            lfpr,
            vd,
            pred_volume_mm3: p * voxel_volume_mm3,
            gt_volume_mm3: g * voxel_volume_mm3,
            counts,
        }
    }
}

fn positive_flags(ls: &LesionSet) -> Vec<bool> {
    let (nx, ny, nz) = ls.dims;
    let mut flags = vec![false; nx * ny * nz];
    for lesion in &ls.lesions {
        for &(x, y, z) in &lesion.voxels {
            flags[x as usize + nx * (y as usize + ny * z as usize)] = true;
        }
    }
    flags
}

/// Evaluates one pair with the size filter applied to both masks.
///
/// # Errors
///
/// `grid-mismatch` when dims or spacing differ; `invalid-size` on a
/// negative or non-finite `min_mm3`.
pub fn evaluate_pair(
    pred: &BinaryMask,
    gt: &BinaryMask,
    connectivity: Connectivity,
    min_mm3: f64,
) -> Result<MetricsReport> {
    evaluate_pair_with(pred, gt, connectivity, min_mm3, FilterSide::Both)
}

/// [`evaluate_pair`] with explicit control over which side is filtered.
///
/// Detection rule: a ground-truth lesion counts as detected iff at least
/// one predicted-positive voxel lies inside it; a predicted lesion is
/// false iff it shares zero voxels with the (filtered) ground truth.
/// Voxel-wise terms use the filtered masks.
pub fn evaluate_pair_with(
    pred: &BinaryMask,
    gt: &BinaryMask,
    connectivity: Connectivity,
    min_mm3: f64,
    side: FilterSide,
) -> Result<MetricsReport> {
    if !pred.volume().same_grid(gt.volume()) {
        return Err(Error::GridMismatch(
            pred.volume().grid_diff(gt.volume()),
        ));
    }

    let pred_ls = label_components(pred, connectivity);
    let gt_ls = label_components(gt, connectivity);
    let (pred_ls, gt_ls) = match side {
        FilterSide::Both => (
            filter_min_size(&pred_ls, min_mm3)?,
            filter_min_size(&gt_ls, min_mm3)?,
        ),
        FilterSide::GtOnly => (pred_ls, filter_min_size(&gt_ls, min_mm3)?),
        FilterSide::PredOnly => (filter_min_size(&pred_ls, min_mm3)?, gt_ls),
    };

    let pred_flags = positive_flags(&pred_ls);
    let gt_flags = positive_flags(&gt_ls);
    let nx = pred_ls.dims.0;
    let ny = pred_ls.dims.1;
    let at = |flags: &[bool], v: (u32, u32, u32)| {
        flags[v.0 as usize + nx * (v.1 as usize + ny * v.2 as usize)]
    };

    let mut overlap_voxels = 0u64;
    let mut false_lesions = 0u64;
    for lesion in &pred_ls.lesions {
        let hits = lesion.voxels.iter().filter(|&&v| at(&gt_flags, v)).count() as u64;
        overlap_voxels += hits;
        if hits == 0 {
            false_lesions += 1;
        }
    }
    let detected_lesions = gt_ls
        .lesions
        .iter()
        .filter(|l| l.voxels.iter().any(|&v| at(&pred_flags, v)))
        .count() as u64;

    let counts = PairCounts {
        pred_voxels: pred_ls.total_voxels(),
        gt_voxels: gt_ls.total_voxels(),
        overlap_voxels,
        gt_lesions: gt_ls.len() as u64,
        pred_lesions: pred_ls.len() as u64,
        detected_lesions,
        false_lesions,
    };
    Ok(MetricsReport::from_counts(
        counts,
        pred.volume().voxel_volume_mm3(),
    ))
}

/// Total lesion volume of a mask in milliliters, after dropping lesions
/// below `min_mm3`. 1 ml = 1000 mm³.
///
/// # Errors
///
/// `invalid-size` on a negative or non-finite `min_mm3`.
pub fn total_lesion_volume_ml(
    m: &BinaryMask,
    connectivity: Connectivity,
    min_mm3: f64,
) -> Result<f64> {
    let ls = label_components(m, connectivity);
    let kept = filter_min_size(&ls, min_mm3)?;
    Ok(kept.total_volume_mm3() / 1000.0)
}
