//! Per-group summary tables: the median/mean of each metric with its
//! range and the count of cases where the metric was defined.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{CohortRecord, TlvBand};

/// How the cohort is partitioned into table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    /// One row over the whole cohort.
    #[default]
    None,
    /// One row per lesion-load band (low / moderate / high).
    Tlv,
    /// One row per scanner id, sorted.
    Scanner,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKey::None => "none",
            GroupKey::Tlv => "tlv",
            GroupKey::Scanner => "scanner",
        })
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(GroupKey::None),
            "tlv" => Ok(GroupKey::Tlv),
            "scanner" => Ok(GroupKey::Scanner),
            other => Err(Error::InvalidKey(format!(
                "unknown group key {other:?} (expected none, tlv, or scanner)"
            ))),
        }
    }
}

/// The summary statistic reported per metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Median,
    Mean,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Median => "median",
            Statistic::Mean => "mean",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Statistic::Median),
            "mean" => Ok(Statistic::Mean),
            other => Err(Error::InvalidKey(format!(
                "unknown statistic {other:?} (expected median or mean)"
            ))),
        }
    }
}

/// One metric's summary within a group: the statistic over the cases
/// where the metric is defined, the observed range, and that case count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n_defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub n_cases: usize,
    pub dice: MetricSummary,
    pub tp_rate: MetricSummary,
    pub ltpr: MetricSummary,
    pub lfpr: MetricSummary,
    pub vd: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub group_key: GroupKey,
    pub statistic: Statistic,
    pub rows: Vec<SummaryRow>,
}

fn summarize(mut values: Vec<f64>, statistic: Statistic) -> MetricSummary {
    let n_defined = values.len();
    if n_defined == 0 {
        return MetricSummary {
            value: None,
            min: None,
            max: None,
            n_defined: 0,
        };
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    let value = match statistic {
        Statistic::Mean => values.iter().sum::<f64>() / n_defined as f64,
        Statistic::Median => {
            let mid = n_defined / 2;
            if n_defined % 2 == 1 {
                values[mid]
            } else {
                (values[mid - 1] + values[mid]) / 2.0
            }
        }
    };
    MetricSummary {
        value: Some(value),
        min: Some(values[0]),
        max: Some(values[n_defined - 1]),
        n_defined,
    }
}

fn summarize_group(group: &str, records: &[&CohortRecord], statistic: Statistic) -> SummaryRow {
    let collect = |select: fn(&CohortRecord) -> Option<f64>| -> Vec<f64> {
        records.iter().filter_map(|r| select(r)).collect()
    };
    SummaryRow {
        group: group.to_string(),
        n_cases: records.len(),
        dice: summarize(collect(|r| Some(r.report.dice)), statistic),
        tp_rate: summarize(collect(|r| r.report.tp_rate), statistic),
        ltpr: summarize(collect(|r| r.report.ltpr), statistic),
        lfpr: summarize(collect(|r| r.report.lfpr), statistic),
        vd: summarize(collect(|r| r.report.vd), statistic),
    }
}

/// Builds the per-group metric table.
///
/// TLV grouping always emits all three band rows (possibly empty) so the
/// table shape is stable; scanner grouping emits one row per distinct id
/// in sorted order.
///
/// # Errors
///
/// `insufficient-data` on an empty cohort.
pub fn aggregate(
    cohort: &[CohortRecord],
    group_key: GroupKey,
    statistic: Statistic,
) -> Result<SummaryTable> {
    if cohort.is_empty() {
        return Err(Error::InsufficientData(
            "aggregate needs at least one case".to_string(),
        ));
    }

    let rows = match group_key {
        GroupKey::None => {
            let all: Vec<&CohortRecord> = cohort.iter().collect();
            vec![summarize_group("all", &all, statistic)]
        }
        GroupKey::Tlv => [TlvBand::Low, TlvBand::Moderate, TlvBand::High]
            .into_iter()
            .map(|band| {
                let members: Vec<&CohortRecord> = cohort
                    .iter()
                    .filter(|r| TlvBand::of(r.gt_tlv_ml) == band)
                    .collect();
                summarize_group(band.name(), &members, statistic)
            })
            .collect(),
        GroupKey::Scanner => {
            let ids: BTreeSet<&str> = cohort.iter().map(|r| r.scanner_id.as_str()).collect();
            ids.into_iter()
                .map(|id| {
                    let members: Vec<&CohortRecord> =
                        cohort.iter().filter(|r| r.scanner_id == id).collect();
                    summarize_group(id, &members, statistic)
                })
                .collect()
        }
    };

    Ok(SummaryTable {
        group_key,
        statistic,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MetricsReport, PairCounts};

    fn record(case_id: &str, scanner: &str, tlv: f64, counts: PairCounts) -> CohortRecord {
        CohortRecord {
            case_id: case_id.to_string(),
            scanner_id: scanner.to_string(),
            gt_tlv_ml: tlv,
            report: MetricsReport::from_counts(counts, 1.0),
        }
    }

    fn simple_counts(overlap: u64, pred: u64, gt: u64) -> PairCounts {
        PairCounts {
            pred_voxels: pred,
            gt_voxels: gt,
            overlap_voxels: overlap,
            gt_lesions: 1,
            pred_lesions: 1,
            detected_lesions: 1,
            false_lesions: 0,
        }
    }

    #[test]
    fn single_case_summary_mirrors_the_case() {
        let r = record("a", "s1", 1.0, simple_counts(3, 4, 5));
        let table = aggregate(std::slice::from_ref(&r), GroupKey::None, Statistic::Median).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.group, "all");
        assert_eq!(row.n_cases, 1);
        assert_eq!(row.dice.value, Some(r.report.dice));
        assert_eq!(row.dice.min, row.dice.max);
        assert_eq!(row.tp_rate.value, r.report.tp_rate);
        assert_eq!(row.vd.value, r.report.vd);
    }

    #[test]
    fn mean_and_range_of_known_dice_values() {
        // Dice values 0.47, 0.59, 0.64, 0.60, 0.65 via overlap/total
        // counts; mean 0.59 with range (0.47, 0.65).
        let dice_targets = [0.47f64, 0.59, 0.64, 0.60, 0.65];
        let cohort: Vec<CohortRecord> = dice_targets
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                // dice = 2·overlap / (pred + gt); use pred = gt = 100 so
                // overlap = 100·d.
                let overlap = (100.0 * d).round() as u64;
                record(&format!("c{i}"), "s1", 10.0, simple_counts(overlap, 100, 100))
            })
            .collect();
        let table = aggregate(&cohort, GroupKey::None, Statistic::Mean).unwrap();
        let dice = &table.rows[0].dice;
        assert!((dice.value.unwrap() - 0.59).abs() < 1e-12);
        assert!((dice.min.unwrap() - 0.47).abs() < 1e-12);
        assert!((dice.max.unwrap() - 0.65).abs() < 1e-12);
        assert_eq!(dice.n_defined, 5);
    }

    #[test]
    fn even_median_averages_the_middle_pair() {
        let cohort: Vec<CohortRecord> = [20u64, 40, 60, 100]
            .iter()
            .enumerate()
            .map(|(i, &overlap)| {
                record(&format!("c{i}"), "s1", 1.0, simple_counts(overlap, 100, 100))
            })
            .collect();
        let table = aggregate(&cohort, GroupKey::None, Statistic::Median).unwrap();
        // dice values {0.2, 0.4, 0.6, 1.0}: the median averages 0.4 and 0.6.
        assert!((table.rows[0].dice.value.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_metrics_are_excluded_with_count() {
        let defined = record("a", "s1", 1.0, simple_counts(5, 10, 10));
        let mut empty_pred = simple_counts(0, 0, 10);
        empty_pred.pred_lesions = 0;
        empty_pred.detected_lesions = 0;
        let undefined = record("b", "s1", 1.0, empty_pred);
        assert_eq!(undefined.report.lfpr, None);
        let table =
            aggregate(&[defined.clone(), undefined], GroupKey::None, Statistic::Mean).unwrap();
        let lfpr = &table.rows[0].lfpr;
        assert_eq!(lfpr.n_defined, 1);
        assert_eq!(lfpr.value, defined.report.lfpr);
        assert_eq!(table.rows[0].dice.n_defined, 2);
    }

    #[test]
    fn median_is_permutation_invariant() {
        let mut cohort: Vec<CohortRecord> = [30u64, 10, 50, 20, 40]
            .iter()
            .enumerate()
            .map(|(i, &overlap)| {
                record(&format!("c{i}"), "s1", 1.0, simple_counts(overlap, 100, 100))
            })
            .collect();
        let forward = aggregate(&cohort, GroupKey::None, Statistic::Median).unwrap();
        cohort.reverse();
        let backward = aggregate(&cohort, GroupKey::None, Statistic::Median).unwrap();
        assert_eq!(forward.rows[0].dice, backward.rows[0].dice);
    }

    #[test]
    fn tlv_grouping_emits_all_bands() {
        let cohort = vec![
            record("a", "s1", 1.0, simple_counts(5, 10, 10)),
            record("b", "s1", 20.0, simple_counts(5, 10, 10)),
        ];
        let table = aggregate(&cohort, GroupKey::Tlv, Statistic::Median).unwrap();
        let names: Vec<&str> = table.rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, ["low", "moderate", "high"]);
        assert_eq!(table.rows[0].n_cases, 1);
        assert_eq!(table.rows[1].n_cases, 0);
        assert_eq!(table.rows[1].dice.value, None);
        assert_eq!(table.rows[2].n_cases, 1);
    }

    #[test]
    fn scanner_grouping_sorts_ids() {
        let cohort = vec![
            record("a", "siemens", 1.0, simple_counts(5, 10, 10)),
            record("b", "ge", 1.0, simple_counts(5, 10, 10)),
            record("c", "siemens", 1.0, simple_counts(5, 10, 10)),
        ];
        let table = aggregate(&cohort, GroupKey::Scanner, Statistic::Mean).unwrap();
        let names: Vec<&str> = table.rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, ["ge", "siemens"]);
        assert_eq!(table.rows[1].n_cases, 2);
    }

    #[test]
    fn empty_cohort_is_insufficient() {
        assert_eq!(
            aggregate(&[], GroupKey::None, Statistic::Median).unwrap_err().code(),
            "insufficient-data"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!("tlv".parse::<GroupKey>().unwrap(), GroupKey::Tlv);
        assert_eq!(
            "bogus".parse::<GroupKey>().unwrap_err().code(),
            "invalid-key"
        );
        assert_eq!("mean".parse::<Statistic>().unwrap(), Statistic::Mean);
        assert_eq!(
            "mode".parse::<Statistic>().unwrap_err().code(),
            "invalid-key"
        );
    }
}
