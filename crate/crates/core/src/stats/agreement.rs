//! Bland-Altman agreement between predicted and reference volumes.
//!
//! The convention throughout is `diff = pred − gt`, so a method that
//! undersegments shows a negative bias. Limits of agreement use the
//! standard ±1.96·sd band with the n−1 (sample) standard deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    /// The input pairs, `(pred, gt)`, in the order given.
    pub pairs: Vec<(f64, f64)>,
    /// Plot-ready points: `((pred + gt) / 2, pred − gt)` per pair.
    pub points: Vec<(f64, f64)>,
    pub mean_diff: f64,
    /// Sample standard deviation (n−1) of the differences.
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

/// Computes bias and limits of agreement for paired volume measurements.
///
/// # Errors
///
/// `insufficient-data` with fewer than two pairs; `invariant-violation`
/// on non-finite values.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<BlandAltman> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "bland-altman needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|(p, g)| !p.is_finite() || !g.is_finite()) {
        return Err(Error::InvariantViolation(
            "bland-altman inputs must be finite".to_string(),
        ));
    }

    let points: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(pred, gt)| ((pred + gt) / 2.0, pred - gt))
        .collect();
    let n = pairs.len() as f64;
    let mean_diff = points.iter().map(|(_, d)| d).sum::<f64>() / n;
    let var = points
        .iter()
        .map(|(_, d)| (d - mean_diff).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let sd_diff = var.sqrt();

    Ok(BlandAltman {
        pairs: pairs.to_vec(),
        points,
        mean_diff,
        sd_diff,
        loa_low: mean_diff - 1.96 * sd_diff,
        loa_high: mean_diff + 1.96 * sd_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pairs_have_zero_spread() {
        let ba = bland_altman(&[(3.0, 3.0), (3.0, 3.0), (3.0, 3.0)]).unwrap();
        assert_eq!(ba.mean_diff, 0.0);
        assert_eq!(ba.sd_diff, 0.0);
        assert_eq!(ba.loa_low, 0.0);
        assert_eq!(ba.loa_high, 0.0);
    }

    #[test]
    fn two_pair_worked_example() {
        // diffs {1, 2}: mean 1.5, sd √0.5 ≈ 0.7071,
        // limits 1.5 ∓ 1.96·0.7071 ≈ (0.114, 2.886).
        let ba = bland_altman(&[(2.0, 1.0), (3.0, 1.0)]).unwrap();
        assert_eq!(ba.mean_diff, 1.5);
        assert!((ba.sd_diff - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((ba.loa_low - 0.114).abs() < 1e-3);
        assert!((ba.loa_high - 2.886).abs() < 1e-3);
        assert_eq!(ba.points[0], (1.5, 1.0));
        assert_eq!(ba.points[1], (2.0, 2.0));
    }

    #[test]
    fn undersegmentation_gives_negative_bias() {
        let ba = bland_altman(&[(1.0, 2.0), (2.5, 3.0), (0.2, 0.9)]).unwrap();
        assert!(ba.mean_diff < 0.0);
        assert!(ba.loa_low <= ba.mean_diff && ba.mean_diff <= ba.loa_high);
    }

    #[test]
    fn mean_recomputed_from_points_matches() {
        let ba = bland_altman(&[(5.2, 4.1), (3.3, 3.9), (7.7, 7.0), (1.1, 1.4)]).unwrap();
        let recomputed = ba.points.iter().map(|(_, d)| d).sum::<f64>() / ba.points.len() as f64;
        assert!((recomputed - ba.mean_diff).abs() < 1e-12);
    }

    #[test]
    fn one_pair_is_insufficient() {
        assert_eq!(
            bland_altman(&[(1.0, 1.0)]).unwrap_err().code(),
            "insufficient-data"
        );
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert_eq!(
            bland_altman(&[(f64::INFINITY, 1.0), (1.0, 1.0)]).unwrap_err().code(),
            "invariant-violation"
        );
    }
}
