//! Cohort-level analysis: ROC sweeps over binarization thresholds,
//! total-lesion-volume stratification, paired Wilcoxon signed-rank tests,
//! Bland-Altman agreement, and per-group summary tables.
//!
//! Everything here consumes per-case [`MetricsReport`]s (or probability
//! maps it evaluates itself) and aggregates deterministically: sums run in
//! a fixed case order no matter how the evaluation work was scheduled, so
//! two runs of the same cohort produce identical bytes.

mod agreement;
mod roc;
mod summary;
mod wilcoxon;

pub use agreement::{bland_altman, BlandAltman};
pub use roc::{
    default_threshold_grid, optimize_threshold, roc_sweep, roc_sweep_with, RocCurve, RocMode,
    RocPoint,
};
pub use summary::{aggregate, GroupKey, MetricSummary, Statistic, SummaryRow, SummaryTable};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_opts, WilcoxonMethod, WilcoxonOptions,
    WilcoxonResult, ZeroPolicy,
};

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;

/// One case's evaluated metrics plus the metadata used for grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub case_id: String,
    pub scanner_id: String,
    /// Ground-truth total lesion volume in ml, the stratification key.
    pub gt_tlv_ml: f64,
    pub report: MetricsReport,
}

/// Lesion-load band: low < 5 ml, moderate 5–15 ml inclusive, high > 15 ml.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TlvBand {
    Low,
    Moderate,
    High,
}

impl TlvBand {
    pub fn of(tlv_ml: f64) -> TlvBand {
        if tlv_ml < 5.0 {
            TlvBand::Low
        } else if tlv_ml <= 15.0 {
            TlvBand::Moderate
        } else {
            TlvBand::High
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TlvBand::Low => "low",
            TlvBand::Moderate => "moderate",
            TlvBand::High => "high",
        }
    }
}

/// The cohort partitioned by lesion-load band.
#[derive(Debug, Clone, Default)]
pub struct TlvStrata {
    pub low: Vec<CohortRecord>,
    pub moderate: Vec<CohortRecord>,
    pub high: Vec<CohortRecord>,
}

/// Splits a cohort into low/moderate/high lesion-load groups. Cases keep
/// their relative order inside each group.
pub fn stratify_tlv(cohort: &[CohortRecord]) -> TlvStrata {
    let mut strata = TlvStrata::default();
    for record in cohort {
        let bucket = match TlvBand::of(record.gt_tlv_ml) {
            TlvBand::Low => &mut strata.low,
            TlvBand::Moderate => &mut strata.moderate,
            TlvBand::High => &mut strata.high,
        };
        bucket.push(record.clone());
    }
    strata
}

#[cfg(test)]
pub(crate) fn record_with_tlv(case_id: &str, tlv_ml: f64) -> CohortRecord {
    use crate::metrics::PairCounts;
    CohortRecord {
        case_id: case_id.to_string(),
        scanner_id: "scanner-a".to_string(),
        gt_tlv_ml: tlv_ml,
        report: MetricsReport::from_counts(
            PairCounts {
                pred_voxels: 1,
                gt_voxels: 1,
                overlap_voxels: 1,
                gt_lesions: 1,
                pred_lesions: 1,
                detected_lesions: 1,
                false_lesions: 0,
            },
            1.0,
        ),
    }
}
