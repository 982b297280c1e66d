//! One module per subcommand, plus the argument enums they share.

pub mod apply;
pub mod bland_altman;
pub mod cohort;
pub mod eval;
pub mod match_hist;
pub mod roc;
pub mod synth;
pub mod train;
pub mod wilcoxon;

use clap::ValueEnum;
use serde::Serialize;

use lesionbench_core::io::VolumeFormat;
use lesionbench_core::metrics::MetricsReport;

use crate::provenance::{fmt_f64, fmt_opt};

/// Report serialization for single-report outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Container for written volumes. Readers auto-detect, so this only
/// matters on the writing side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormatArg {
    Nifti,
    Raw,
}

impl VolumeFormatArg {
    pub fn format(self) -> VolumeFormat {
        match self {
            VolumeFormatArg::Nifti => VolumeFormat::Nifti,
            VolumeFormatArg::Raw => VolumeFormat::Raw,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            VolumeFormatArg::Nifti => "nii",
            VolumeFormatArg::Raw => "raw",
        }
    }
}

/// The per-report CSV cells shared by `eval` outputs and cohort case
/// tables: the five metrics, physical volumes, then lesion counts.
pub const REPORT_COLUMNS: &str = "dice,tp_rate,ltpr,lfpr,vd,pred_volume_mm3,gt_volume_mm3,\
                                  pred_lesions,gt_lesions,detected_lesions,false_lesions";

pub fn report_row(r: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(r.dice),
        fmt_opt(r.tp_rate),
        fmt_opt(r.ltpr),
        fmt_opt(r.lfpr),
        fmt_opt(r.vd),
        fmt_f64(r.pred_volume_mm3),
        fmt_f64(r.gt_volume_mm3),
        r.counts.pred_lesions,
        r.counts.gt_lesions,
        r.counts.detected_lesions,
        r.counts.false_lesions,
    )
}
