//! ROC-style sweeps of the binarization threshold, and the validation
//! search for the operating threshold.
//!
//! Each sweep point binarizes every case's probability map at one
//! threshold, evaluates the pair, and averages the lesion-wise rates.
//! A per-case rate can be undefined (no ground-truth lesions for LTPR, an
//! empty prediction for LFPR — routine near threshold 1); such cases are
//! excluded from that point's mean and counted, never imputed, since
//! imputing zeros would flatter exactly the interesting end of the curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conncomp::Connectivity;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_pair, MetricsReport};
use crate::volume::{BinaryMask, ProbabilityMap};

/// How per-case lesion rates combine into one curve point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RocMode {
    /// Average the per-case rates over cases where they are defined.
    #[default]
    MeanOverCases,
    /// Pool lesion counts cohort-wide, then take one ratio.
    PooledLesions,
}

/// One threshold's aggregated rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    /// Mean lesion-wise false-positive rate; `None` when undefined for
    /// every case.
    pub mean_lfpr: Option<f64>,
    /// Mean lesion-wise true-positive rate; `None` when undefined for
    /// every case.
    pub mean_ltpr: Option<f64>,
    /// Cases contributing to `mean_lfpr` (the rest were undefined).
    pub lfpr_defined: usize,
    /// Cases contributing to `mean_ltpr`.
    pub ltpr_defined: usize,
}

/// A full sweep: one point per threshold, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    /// Minimum lesion size the sweep was computed under.
    pub min_mm3: f64,
    pub n_cases: usize,
    pub mode: RocMode,
}

/// The default sweep grid: 51 evenly spaced thresholds from 0 to 1.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 50.0).collect()
}

fn validate_grid(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidGrid("threshold grid is empty".to_string()));
    }
    for &t in thresholds {
        if !(t.is_finite() && (0.0..=1.0).contains(&t)) {
            return Err(Error::InvalidGrid(format!(
                "threshold {t} outside [0, 1]"
            )));
        }
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "thresholds must be strictly increasing".to_string(),
        ));
    }
    Ok(())
}

/// Evaluates every case at every threshold. Parallel over thresholds;
/// within one threshold the cases run in manifest order, so accumulation
/// is deterministic regardless of scheduling.
fn reports_per_threshold(
    cases: &[(ProbabilityMap, BinaryMask)],
    thresholds: &[f64],
    min_mm3: f64,
    connectivity: Connectivity,
) -> Result<Vec<Vec<MetricsReport>>> {
    thresholds
        .par_iter()
        .map(|&t| {
            cases
                .iter()
                .map(|(prob, gt)| {
                    let pred = prob.binarize(t)?;
                    evaluate_pair(&pred, gt, connectivity, min_mm3)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn mean_defined<I: Iterator<Item = Option<f64>>>(values: I) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    ((n > 0).then(|| sum / n as f64), n)
}

fn ratio(numerator: u64, denominator: u64) -> Option<f64> {
    (denominator > 0).then(|| numerator as f64 / denominator as f64)
}

/// Sweeps the threshold grid, averaging rates over cases.
///
/// # Errors
///
/// `insufficient-data` without cases; `invalid-grid` on an empty,
/// non-increasing, or out-of-range grid; evaluation errors propagate.
pub fn roc_sweep(
    cases: &[(ProbabilityMap, BinaryMask)],
    thresholds: &[f64],
    min_mm3: f64,
    connectivity: Connectivity,
) -> Result<RocCurve> {
    roc_sweep_with(cases, thresholds, min_mm3, connectivity, RocMode::MeanOverCases)
}

/// [`roc_sweep`] with an explicit aggregation mode.
pub fn roc_sweep_with(
    cases: &[(ProbabilityMap, BinaryMask)],
    thresholds: &[f64],
    min_mm3: f64,
    connectivity: Connectivity,
    mode: RocMode,
) -> Result<RocCurve> {
    if cases.is_empty() {
        return Err(Error::InsufficientData(
            "roc sweep needs at least one case".to_string(),
        ));
    }
    validate_grid(thresholds)?;
    let per_threshold = reports_per_threshold(cases, thresholds, min_mm3, connectivity)?;

    let points = thresholds
        .iter()
        .zip(&per_threshold)
        .map(|(&threshold, reports)| match mode {
            RocMode::MeanOverCases => {
                let (mean_lfpr, lfpr_defined) = mean_defined(reports.iter().map(|r| r.lfpr));
                let (mean_ltpr, ltpr_defined) = mean_defined(reports.iter().map(|r| r.ltpr));
                RocPoint {
                    threshold,
                    mean_lfpr,
                    mean_ltpr,
                    lfpr_defined,
                    ltpr_defined,
                }
            }
            RocMode::PooledLesions => {
                let false_lesions: u64 = reports.iter().map(|r| r.counts.false_lesions).sum();
                let pred_lesions: u64 = reports.iter().map(|r| r.counts.pred_lesions).sum();
                let detected: u64 = reports.iter().map(|r| r.counts.detected_lesions).sum();
                let gt_lesions: u64 = reports.iter().map(|r| r.counts.gt_lesions).sum();
                RocPoint {
                    threshold,
                    mean_lfpr: ratio(false_lesions, pred_lesions),
                    mean_ltpr: ratio(detected, gt_lesions),
                    lfpr_defined: reports.iter().filter(|r| r.lfpr.is_some()).count(),
                    ltpr_defined: reports.iter().filter(|r| r.ltpr.is_some()).count(),
                }
            }
        })
        .collect();

    Ok(RocCurve {
        points,
        min_mm3,
        n_cases: cases.len(),
        mode,
    })
}

/// Picks the operating threshold on validation cases: the grid value
/// maximizing `mean(dice) + (1 − mean(lfpr))`, both terms weighted
/// equally. When LFPR is undefined for every case the false-positive term
/// is vacuously perfect (there are no predicted lesions to be wrong
/// about). Ties go to the lower threshold.
///
/// # Errors
///
/// As [`roc_sweep`].
pub fn optimize_threshold(
    validation: &[(ProbabilityMap, BinaryMask)],
    thresholds: &[f64],
    min_mm3: f64,
    connectivity: Connectivity,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::InsufficientData(
            "threshold optimization needs at least one validation case".to_string(),
        ));
    }
    validate_grid(thresholds)?;
    let per_threshold = reports_per_threshold(validation, thresholds, min_mm3, connectivity)?;

    let mut best_threshold = thresholds[0];
    let mut best_score = f64::NEG_INFINITY;
    for (&threshold, reports) in thresholds.iter().zip(&per_threshold) {
        let mean_dice =
            reports.iter().map(|r| r.dice).sum::<f64>() / reports.len() as f64;
        let (mean_lfpr, _) = mean_defined(reports.iter().map(|r| r.lfpr));
        let score = mean_dice + (1.0 - mean_lfpr.unwrap_or(0.0));
        if score > best_score {
            best_score = score;
            best_threshold = threshold;
        }
    }
    Ok(best_threshold)
}
