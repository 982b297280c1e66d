//! `cohort`: evaluate every method over a manifest of cases and emit the
//! full analysis set — per-case tables, grouped summaries, ROC sweeps
//! per minimum lesion size, Bland-Altman volume agreement, and pairwise
//! Wilcoxon tests between methods.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use lesionbench_core::metrics::{evaluate_pair, total_lesion_volume_ml, MetricsReport};
use lesionbench_core::stats::{
    aggregate, bland_altman, roc_sweep, wilcoxon_signed_rank, BlandAltman, CohortRecord,
    GroupKey, Statistic, SummaryRow, TlvBand, WilcoxonResult,
};
use lesionbench_core::{BinaryMask, Connectivity, Error, ProbabilityMap, Result};

use crate::commands::roc::roc_rows;
use crate::commands::{report_row, REPORT_COLUMNS};
use crate::manifest::{load_mask, load_probability, resolve, Manifest};
use crate::provenance::{
    fmt_f64, fmt_opt, write_csv_artifact, write_json_artifact, Provenance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupArg {
    /// One summary row over the whole cohort.
    None,
    /// One row per lesion-load band.
    Tlv,
    /// One row per scanner id.
    Scanner,
}

impl GroupArg {
    fn key(self) -> GroupKey {
        match self {
            GroupArg::None => GroupKey::None,
            GroupArg::Tlv => GroupKey::Tlv,
            GroupArg::Scanner => GroupKey::Scanner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatArg {
    Median,
    Mean,
}

impl StatArg {
    fn statistic(self) -> Statistic {
        match self {
            StatArg::Median => Statistic::Median,
            StatArg::Mean => Statistic::Mean,
        }
    }
}

#[derive(Args, Serialize)]
pub struct CohortArgs {
    /// Cohort manifest (JSON). Case order defines the pairing used by
    /// the Wilcoxon tests.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Directory the result tables are written into.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Voxel neighborhood defining connected components: 6, 18, or 26.
    #[arg(long, default_value_t = 26)]
    pub connectivity: u8,

    /// Minimum lesion size in mm³ for the tables and paired tests.
    #[arg(long, default_value_t = 0.0)]
    pub min_mm3: f64,

    /// Binarization threshold applied to each method volume for the
    /// tables. Binary masks are unaffected by any value in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,

    /// Summary statistic for the aggregate tables.
    #[arg(long, value_enum, default_value_t = StatArg::Median)]
    pub statistic: StatArg,

    /// Groupings to emit, comma separated.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = [GroupArg::None, GroupArg::Tlv, GroupArg::Scanner]
    )]
    pub groups: Vec<GroupArg>,

    /// Minimum lesion sizes (mm³) swept by the ROC curves; one output
    /// file per method per size.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0])]
    pub roc_min_mm3: Vec<f64>,

    /// Drop cases whose files are missing instead of aborting.
    #[arg(long)]
    pub skip_missing: bool,
}

/// One case fully in memory: the ground truth plus one probability
/// volume per method, in method-name order.
struct LoadedCase {
    id: String,
    scanner: String,
    tlv_ml: f64,
    gt: BinaryMask,
    probs: Vec<ProbabilityMap>,
}

#[derive(Serialize)]
struct BlandAltmanArtifact<'a> {
    provenance: &'a Provenance,
    /// Volumes in ml; differences are prediction minus ground truth.
    methods: BTreeMap<String, BlandAltman>,
}

#[derive(Serialize)]
struct PairedTest {
    metric: &'static str,
    method_a: String,
    method_b: String,
    /// Cases where the metric was defined for both methods.
    n_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<WilcoxonResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct WilcoxonArtifact<'a> {
    provenance: &'a Provenance,
    tests: Vec<PairedTest>,
}

type MetricSelect = fn(&MetricsReport) -> Option<f64>;

const METRICS: [(&str, MetricSelect); 5] = [
    ("dice", |r| Some(r.dice)),
    ("tp_rate", |r| r.tp_rate),
    ("ltpr", |r| r.ltpr),
    ("lfpr", |r| r.lfpr),
    ("vd", |r| r.vd),
];

fn summary_rows(rows: &[SummaryRow], statistic: Statistic) -> Vec<String> {
    rows.iter()
        .map(|row| {
            let cell = |m: &lesionbench_core::stats::MetricSummary| {
                format!(
                    "{},{},{},{}",
                    fmt_opt(m.value),
                    fmt_opt(m.min),
                    fmt_opt(m.max),
                    m.n_defined
                )
            };
            format!(
                "{},{statistic},{},{},{},{},{},{}",
                row.group,
                row.n_cases,
                cell(&row.dice),
                cell(&row.tp_rate),
                cell(&row.ltpr),
                cell(&row.lfpr),
                cell(&row.vd),
            )
        })
        .collect()
}

pub const SUMMARY_COLUMNS: &str = "group,statistic,n_cases,\
    dice,dice_min,dice_max,dice_n,\
    tp_rate,tp_rate_min,tp_rate_max,tp_rate_n,\
    ltpr,ltpr_min,ltpr_max,ltpr_n,\
    lfpr,lfpr_min,lfpr_max,lfpr_n,\
    vd,vd_min,vd_max,vd_n";

pub fn run(args: &CohortArgs) -> Result<()> {
    let connectivity = Connectivity::from_u8(args.connectivity)?;
    let statistic = args.statistic.statistic();
    let base = args
        .manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();

    let mut manifest = Manifest::load(&args.manifest)?;
    manifest.prune_missing(&base, args.skip_missing, |case| {
        let mut paths: Vec<String> = case.gt.iter().cloned().collect();
        paths.extend(case.methods.values().cloned());
        paths
    })?;
    let methods = manifest.method_names()?;

    let mut provenance = Provenance::new("cohort", args)?;
    provenance.add_input(&args.manifest.display().to_string(), &args.manifest)?;
    for case in &manifest.cases {
        let gt = case.gt_path()?;
        provenance.add_input(gt, &resolve(&base, gt))?;
        for path in case.methods.values() {
            provenance.add_input(path, &resolve(&base, path))?;
        }
    }

    let loaded: Vec<LoadedCase> = manifest
        .cases
        .par_iter()
        .map(|case| -> Result<LoadedCase> {
            let gt_rel = case.gt_path()?;
            let gt = load_mask(gt_rel, &resolve(&base, gt_rel))?;
            let tlv_ml = match case.tlv_ml {
                Some(v) => v,
                None => total_lesion_volume_ml(&gt, connectivity, args.min_mm3)?,
            };
            let probs = methods
                .iter()
                .map(|m| {
                    let rel = &case.methods[m];
                    load_probability(rel, &resolve(&base, rel))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LoadedCase {
                id: case.id.clone(),
                scanner: case.scanner.clone().unwrap_or_else(|| "unknown".to_string()),
                tlv_ml,
                gt,
                probs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(&args.out_dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", args.out_dir.display()),
        ))
    })?;

    let case_columns = format!("case_id,scanner,tlv_ml,tlv_band,{REPORT_COLUMNS}");
    let mut per_method_reports: Vec<Vec<MetricsReport>> = Vec::with_capacity(methods.len());
    let mut agreements: BTreeMap<String, BlandAltman> = BTreeMap::new();

    for (mi, method) in methods.iter().enumerate() {
        let records: Vec<CohortRecord> = loaded
            .par_iter()
            .map(|c| -> Result<CohortRecord> {
                let pred = c.probs[mi].binarize(args.threshold)?;
                let report = evaluate_pair(&pred, &c.gt, connectivity, args.min_mm3)?;
                Ok(CohortRecord {
                    case_id: c.id.clone(),
                    scanner_id: c.scanner.clone(),
                    gt_tlv_ml: c.tlv_ml,
                    report,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let case_rows: Vec<String> = records
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.case_id,
                    r.scanner_id,
                    fmt_f64(r.gt_tlv_ml),
                    TlvBand::of(r.gt_tlv_ml).name(),
                    report_row(&r.report)
                )
            })
            .collect();
        let path = args.out_dir.join(format!("cases_{method}.csv"));
        write_csv_artifact(&path, &provenance, &case_columns, &case_rows)?;
        println!("wrote {}", path.display());

        for group in &args.groups {
            let table = aggregate(&records, group.key(), statistic)?;
            let path = args
                .out_dir
                .join(format!("summary_{method}_{}.csv", group.key()));
            write_csv_artifact(
                &path,
                &provenance,
                SUMMARY_COLUMNS,
                &summary_rows(&table.rows, statistic),
            )?;
            println!("wrote {}", path.display());
        }

        let pairs: Vec<(f64, f64)> = records
            .iter()
            .map(|r| {
                (
                    r.report.pred_volume_mm3 / 1000.0,
                    r.report.gt_volume_mm3 / 1000.0,
                )
            })
            .collect();
        let point_rows: Vec<String> = records
            .iter()
            .zip(&pairs)
            .map(|(r, &(p, g))| {
                format!(
                    "{},{},{}",
                    r.case_id,
                    fmt_f64((p + g) / 2.0),
                    fmt_f64(p - g)
                )
            })
            .collect();
        let path = args.out_dir.join(format!("bland_altman_{method}.csv"));
        write_csv_artifact(
            &path,
            &provenance,
            "case_id,mean_ml,diff_ml",
            &point_rows,
        )?;
        println!("wrote {}", path.display());
        if pairs.len() >= 2 {
            agreements.insert(method.clone(), bland_altman(&pairs)?);
        } else {
            eprintln!("bland-altman limits for {method} skipped: needs at least 2 cases");
        }

        let sweep_cases: Vec<(ProbabilityMap, BinaryMask)> = loaded
            .iter()
            .map(|c| (c.probs[mi].clone(), c.gt.clone()))
            .collect();
        for &min_mm3 in &args.roc_min_mm3 {
            let grid = lesionbench_core::stats::default_threshold_grid();
            let curve = roc_sweep(&sweep_cases, &grid, min_mm3, connectivity)?;
            let path = args
                .out_dir
                .join(format!("roc_{method}_min{}.csv", fmt_f64(min_mm3)));
            write_csv_artifact(
                &path,
                &provenance,
                crate::commands::roc::ROC_COLUMNS,
                &roc_rows(&curve),
            )?;
            println!("wrote {}", path.display());
        }

        per_method_reports.push(records.into_iter().map(|r| r.report).collect());
    }

    if !agreements.is_empty() {
        let path = args.out_dir.join("bland_altman.json");
        write_json_artifact(
            &path,
            &BlandAltmanArtifact {
                provenance: &provenance,
                methods: agreements,
            },
        )?;
        println!("wrote {}", path.display());
    }

    if methods.len() >= 2 {
        let mut tests = Vec::new();
        for (metric, select) in METRICS {
            for i in 0..methods.len() {
                for j in i + 1..methods.len() {
                    tests.push(paired_test(
                        metric,
                        select,
                        &methods[i],
                        &per_method_reports[i],
                        &methods[j],
                        &per_method_reports[j],
                    )?);
                }
            }
        }
        let path = args.out_dir.join("wilcoxon.json");
        write_json_artifact(
            &path,
            &WilcoxonArtifact {
                provenance: &provenance,
                tests,
            },
        )?;
        println!("wrote {}", path.display());
    }

    Ok(())
}

/// One paired test over the cases where `metric` is defined for both
/// methods. Cases pair by position, which the shared manifest order
/// guarantees is the same subject.
fn paired_test(
    metric: &'static str,
    select: fn(&MetricsReport) -> Option<f64>,
    name_a: &str,
    reports_a: &[MetricsReport],
    name_b: &str,
    reports_b: &[MetricsReport],
) -> Result<PairedTest> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (ra, rb) in reports_a.iter().zip(reports_b) {
        if let (Some(va), Some(vb)) = (select(ra), select(rb)) {
            a.push(va);
            b.push(vb);
        }
    }
    let mut test = PairedTest {
        metric,
        method_a: name_a.to_string(),
        method_b: name_b.to_string(),
        n_pairs: a.len(),
        result: None,
        note: None,
    };
    if a.is_empty() {
        test.note = Some("skipped: no case defines this metric for both methods".to_string());
        return Ok(test);
    }
    let result = wilcoxon_signed_rank(&a, &b)?;
    if result.is_degenerate() {
        eprintln!(
            "wilcoxon {metric} {name_a} vs {name_b}: degenerate — every paired difference is zero; p = 1"
        );
        test.note = Some("degenerate: every paired difference is zero".to_string());
    }
    test.result = Some(result);
    Ok(test)
}
