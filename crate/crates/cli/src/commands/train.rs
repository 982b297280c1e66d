//! `train`: fit the two-stage cascade on a cohort manifest and archive
//! the model.
//!
//! The manifest supplies the channel order; `--prior-channel` marks one
//! channel as an externally produced lesion-probability map, which is
//! appended after the intensity channels, validated as a probability
//! volume, and exempted from histogram matching. Besides the archive, a
//! report records the split, the tuned threshold, and the archive's
//! checksum.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use lesionbench_core::classifier::knn_factory;
use lesionbench_core::pipeline::{
    train_cascade_with, CascadeCase, CascadeConfig, PatchSpec, PRIOR_CHANNEL,
};
use lesionbench_core::stats::default_threshold_grid;
use lesionbench_core::{Connectivity, Error, Result, Volume};

use crate::manifest::{load_mask, load_probability, load_volume, resolve, CaseEntry, Manifest};
use crate::provenance::{sha256_hex, write_json_artifact, Provenance};

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// Cohort manifest (JSON) with a `channels` order and per-case
    /// channel volumes plus ground truth.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Model archive path.
    #[arg(long)]
    pub out: PathBuf,

    /// Seed for class balancing. Always explicit; equal inputs and seed
    /// give a byte-identical archive.
    #[arg(long)]
    pub seed: u64,

    /// Cube edge of the sampled patches (odd).
    #[arg(long, default_value_t = 3)]
    pub patch_edge: usize,

    /// Neighbor count of the reference kNN stages.
    #[arg(long, default_value_t = 5)]
    pub k: usize,

    /// Fraction of cases held out for threshold tuning, taken from the
    /// end of the manifest. Zero tunes on the training cases.
    #[arg(long, default_value_t = 0.25)]
    pub val_fraction: f64,

    /// Explicit validation case ids (overrides --val-fraction).
    #[arg(long, value_delimiter = ',')]
    pub val_cases: Vec<String>,

    /// Channel carrying a lesion-probability prior instead of an image
    /// intensity.
    #[arg(long)]
    pub prior_channel: Option<String>,

    /// Candidate cut as a fraction of channel 0's mean foreground
    /// intensity.
    #[arg(long, default_value_t = 1.0)]
    pub candidate_frac: f64,

    /// Stage-1 probability above which a voxel reaches stage 2.
    #[arg(long, default_value_t = 0.5)]
    pub stage1_threshold: f64,

    /// Minimum lesion size (mm³) applied to the final mask.
    #[arg(long, default_value_t = 0.0)]
    pub min_mm3: f64,

    /// Voxel neighborhood defining connected components: 6, 18, or 26.
    #[arg(long, default_value_t = 26)]
    pub connectivity: u8,

    /// Use channels as-is instead of matching them to pooled training
    /// references.
    #[arg(long)]
    pub no_histogram_matching: bool,

    /// Drop cases whose files are missing instead of aborting.
    #[arg(long)]
    pub skip_missing: bool,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    provenance: &'a Provenance,
    /// Model channel order; a trailing "PRIOR" stands for the manifest
    /// channel named by `prior_channel`.
    channels: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    prior_channel: &'a Option<String>,
    train_cases: Vec<String>,
    val_cases: Vec<String>,
    binarization_threshold: f64,
    model_sha256: String,
}

/// Loads one case's volumes in model order: intensity channels first,
/// the prior (validated as a probability map) last.
fn load_case(
    base: &Path,
    entry: &CaseEntry,
    intensity_names: &[String],
    prior: &Option<String>,
) -> Result<CascadeCase> {
    let mut channels: Vec<Volume> = Vec::with_capacity(intensity_names.len() + 1);
    for name in intensity_names {
        let rel = &entry.channels[name];
        channels.push(load_volume(rel, &resolve(base, rel))?);
    }
    if let Some(name) = prior {
        let rel = &entry.channels[name];
        channels.push(load_probability(rel, &resolve(base, rel))?.into_volume());
    }
    let gt_rel = entry.gt_path()?;
    let gt = load_mask(gt_rel, &resolve(base, gt_rel))?;
    Ok(CascadeCase {
        id: entry.id.clone(),
        channels,
        gt,
    })
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let connectivity = Connectivity::from_u8(args.connectivity)?;
    let base = args
        .manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();

    let mut manifest = Manifest::load(&args.manifest)?;
    let channel_names = manifest.channel_order()?.to_vec();

    if let Some(prior) = &args.prior_channel {
        if !channel_names.contains(prior) {
            return Err(Error::InvalidKey(format!(
                "--prior-channel {prior:?} is not one of the manifest channels [{}]",
                channel_names.join(", ")
            )));
        }
    }
    if channel_names.iter().any(|n| n == PRIOR_CHANNEL)
        && args.prior_channel.as_deref() != Some(PRIOR_CHANNEL)
    {
        return Err(Error::InvalidKey(format!(
            "channel name {PRIOR_CHANNEL:?} is reserved for the prior; pass --prior-channel {PRIOR_CHANNEL} to use it"
        )));
    }

    manifest.prune_missing(&base, args.skip_missing, |case| {
        let mut paths: Vec<String> = case.gt.iter().cloned().collect();
        paths.extend(
            channel_names
                .iter()
                .filter_map(|n| case.channels.get(n).cloned()),
        );
        paths
    })?;

    let mut provenance = Provenance::new("train", args)?;
    provenance.add_input(&args.manifest.display().to_string(), &args.manifest)?;
    for case in &manifest.cases {
        let gt = case.gt_path()?;
        provenance.add_input(gt, &resolve(&base, gt))?;
        for name in &channel_names {
            let rel = &case.channels[name];
            provenance.add_input(rel, &resolve(&base, rel))?;
        }
    }

    let intensity_names: Vec<String> = channel_names
        .iter()
        .filter(|n| Some(n.as_str()) != args.prior_channel.as_deref())
        .cloned()
        .collect();
    let mut spec = PatchSpec::new(args.patch_edge, intensity_names.clone())?;
    if args.prior_channel.is_some() {
        spec = spec.with_prior();
    }

    // Split by explicit ids when given, otherwise hold out the manifest
    // tail. Both are functions of the manifest alone, so a rerun trains
    // on the same cases.
    let (train_entries, val_entries): (Vec<&CaseEntry>, Vec<&CaseEntry>) =
        if !args.val_cases.is_empty() {
            for id in &args.val_cases {
                if !manifest.cases.iter().any(|c| &c.id == id) {
                    return Err(Error::InvalidKey(format!(
                        "--val-cases names unknown case id {id:?}"
                    )));
                }
            }
            manifest
                .cases
                .iter()
                .partition(|c| !args.val_cases.contains(&c.id))
        } else {
            if !(0.0..1.0).contains(&args.val_fraction) {
                return Err(Error::InvariantViolation(format!(
                    "--val-fraction must be in [0, 1), got {}",
                    args.val_fraction
                )));
            }
            let n = manifest.cases.len();
            let n_val = ((n as f64 * args.val_fraction).floor() as usize).min(n - 1);
            let split = n - n_val;
            (
                manifest.cases[..split].iter().collect(),
                manifest.cases[split..].iter().collect(),
            )
        };
    if train_entries.is_empty() {
        return Err(Error::InsufficientData(
            "--val-cases holds out every case; nothing remains to train on".to_string(),
        ));
    }

    let load_all = |entries: &[&CaseEntry]| -> Result<Vec<CascadeCase>> {
        entries
            .par_iter()
            .map(|e| load_case(&base, e, &intensity_names, &args.prior_channel))
            .collect()
    };
    let train_cases = load_all(&train_entries)?;
    let val_cases = load_all(&val_entries)?;

    let config = CascadeConfig {
        seed: args.seed,
        candidate_frac: args.candidate_frac,
        stage1_threshold: args.stage1_threshold,
        threshold_grid: default_threshold_grid(),
        min_lesion_mm3: args.min_mm3,
        connectivity,
        histogram_matching: !args.no_histogram_matching,
    };
    let factory = knn_factory(args.k);
    let model = train_cascade_with(&train_cases, &val_cases, factory.as_ref(), &spec, &config)?;

    model.save(&args.out)?;
    let model_sha256 = sha256_hex(&args.out)?;

    let report_path = args.out.with_extension("report.json");
    write_json_artifact(
        &report_path,
        &TrainReport {
            provenance: &provenance,
            channels: model.patch_spec.channels(),
            prior_channel: &args.prior_channel,
            train_cases: train_cases.iter().map(|c| c.id.clone()).collect(),
            val_cases: val_cases.iter().map(|c| c.id.clone()).collect(),
            binarization_threshold: model.binarization_threshold,
            model_sha256,
        },
    )?;

    println!(
        "wrote {} (binarization threshold {})",
        args.out.display(),
        model.binarization_threshold
    );
    println!("wrote {}", report_path.display());
    Ok(())
}
