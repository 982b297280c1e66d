//! `roc`: threshold sweeps of the lesion-wise rates for each method in a
//! manifest, one CSV per method per minimum lesion size.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use lesionbench_core::stats::{
    default_threshold_grid, roc_sweep_with, RocCurve, RocMode,
};
use lesionbench_core::{BinaryMask, Connectivity, Error, ProbabilityMap, Result};

use crate::manifest::{load_mask, load_probability, resolve, Manifest};
use crate::provenance::{fmt_f64, fmt_opt, write_csv_artifact, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Average per-case rates over the cases where they are defined.
    #[value(name = "mean")]
    Mean,
    /// Pool lesion counts cohort-wide, then take one ratio.
    #[value(name = "pooled")]
    Pooled,
}

impl ModeArg {
    fn mode(self) -> RocMode {
        match self {
            ModeArg::Mean => RocMode::MeanOverCases,
            ModeArg::Pooled => RocMode::PooledLesions,
        }
    }
}

#[derive(Args, Serialize)]
pub struct RocArgs {
    /// Cohort manifest (JSON); every method volume is swept.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Directory the sweep CSVs are written into.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Voxel neighborhood defining connected components: 6, 18, or 26.
    #[arg(long, default_value_t = 26)]
    pub connectivity: u8,

    /// Minimum lesion sizes (mm³) to sweep; one output file per method
    /// per size.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0])]
    pub min_mm3: Vec<f64>,

    /// Custom threshold grid, comma separated and strictly increasing
    /// within [0, 1]. Defaults to 51 evenly spaced values.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,

    /// Rate aggregation across cases.
    #[arg(long, value_enum, default_value_t = ModeArg::Mean)]
    pub mode: ModeArg,

    /// Drop cases whose files are missing instead of aborting.
    #[arg(long)]
    pub skip_missing: bool,
}

/// Aggregated rate per threshold; the `*_defined` counts say how many
/// cases contributed (mean mode) or had the rate defined (pooled mode).
pub const ROC_COLUMNS: &str = "threshold,lfpr,ltpr,lfpr_defined,ltpr_defined";

pub fn roc_rows(curve: &RocCurve) -> Vec<String> {
    curve
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{}",
                fmt_f64(p.threshold),
                fmt_opt(p.mean_lfpr),
                fmt_opt(p.mean_ltpr),
                p.lfpr_defined,
                p.ltpr_defined
            )
        })
        .collect()
}

pub fn run(args: &RocArgs) -> Result<()> {
    let connectivity = Connectivity::from_u8(args.connectivity)?;
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

    let mut provenance = Provenance::new("roc", args)?;
    provenance.add_input(&args.manifest.display().to_string(), &args.manifest)?;
    for case in &manifest.cases {
        let gt = case.gt_path()?;
        provenance.add_input(gt, &resolve(&base, gt))?;
        for path in case.methods.values() {
            provenance.add_input(path, &resolve(&base, path))?;
        }
    }

    let grid = if args.thresholds.is_empty() {
        default_threshold_grid()
    } else {
        args.thresholds.clone()
    };

    fs::create_dir_all(&args.out_dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", args.out_dir.display()),
        ))
    })?;

    for (mi, method) in methods.iter().enumerate() {
        let cases: Vec<(ProbabilityMap, BinaryMask)> = manifest
            .cases
            .par_iter()
            .map(|case| -> Result<(ProbabilityMap, BinaryMask)> {
                let gt_rel = case.gt_path()?;
                let gt = load_mask(gt_rel, &resolve(&base, gt_rel))?;
                let rel = &case.methods[&methods[mi]];
                let prob = load_probability(rel, &resolve(&base, rel))?;
                Ok((prob, gt))
            })
            .collect::<Result<Vec<_>>>()?;

        for &min_mm3 in &args.min_mm3 {
            let curve = roc_sweep_with(&cases, &grid, min_mm3, connectivity, args.mode.mode())?;
            let path = args
                .out_dir
                .join(format!("roc_{method}_min{}.csv", fmt_f64(min_mm3)));
            write_csv_artifact(&path, &provenance, ROC_COLUMNS, &roc_rows(&curve))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
