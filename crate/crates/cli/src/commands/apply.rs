//! `apply`: run a trained cascade over the cases of a manifest.
//!
//! Each case yields a probability map and the binarized, size-filtered
//! mask at the model's tuned threshold. The output directory also gets
//! an evaluation-ready manifest whose method entry points at the
//! probability maps, with ground-truth paths rebased so the downstream
//! `cohort`/`eval` run needs no editing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use lesionbench_core::io::write_volume;
use lesionbench_core::pipeline::{apply_cascade, CascadeModel, PRIOR_CHANNEL};
use lesionbench_core::{BinaryMask, Error, ProbabilityMap, Result, Volume};

use crate::commands::VolumeFormatArg;
use crate::manifest::{
    load_probability, load_volume, relative_from, resolve, validate_name, CaseEntry, Manifest,
};
use crate::provenance::Provenance;

#[derive(Args, Serialize)]
pub struct ApplyArgs {
    /// Trained model archive.
    #[arg(long)]
    pub model: PathBuf,

    /// Cohort manifest (JSON) with per-case channel volumes.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Directory the predictions are written into.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Method name under which the emitted manifest lists the
    /// predictions.
    #[arg(long, default_value = "cascade")]
    pub method_name: String,

    /// Manifest channel carrying the lesion-probability prior; required
    /// when the model was trained with one.
    #[arg(long)]
    pub prior_channel: Option<String>,

    /// Container for the written volumes.
    #[arg(long, value_enum, default_value_t = VolumeFormatArg::Nifti)]
    pub format: VolumeFormatArg,

    /// Drop cases whose files are missing instead of aborting.
    #[arg(long)]
    pub skip_missing: bool,
}

/// Maps the model's channel names onto manifest channel names. The
/// reserved trailing "PRIOR" resolves through --prior-channel.
fn channel_plan(model: &CascadeModel, prior: &Option<String>) -> Result<Vec<String>> {
    let mut plan = Vec::new();
    for name in model.patch_spec.channels() {
        if name == PRIOR_CHANNEL {
            match prior {
                Some(p) => plan.push(p.clone()),
                None => {
                    return Err(Error::ChannelMismatch(
                        "the model was trained with a prior channel; pass --prior-channel to name it".to_string(),
                    ))
                }
            }
        } else {
            plan.push(name.clone());
        }
    }
    if prior.is_some() && !model.patch_spec.has_prior() {
        return Err(Error::ChannelMismatch(
            "--prior-channel given, but the model was trained without a prior".to_string(),
        ));
    }
    Ok(plan)
}

fn case_channels(
    base: &Path,
    entry: &CaseEntry,
    plan: &[String],
    prior: &Option<String>,
) -> Result<Vec<Volume>> {
    let mut channels = Vec::with_capacity(plan.len());
    for name in plan {
        let rel = entry.channels.get(name).ok_or_else(|| {
            Error::ChannelMismatch(format!(
                "case {:?} has no path for channel {name:?} required by the model",
                entry.id
            ))
        })?;
        let volume = if Some(name) == prior.as_ref() {
            load_probability(rel, &resolve(base, rel))?.into_volume()
        } else {
            load_volume(rel, &resolve(base, rel))?
        };
        channels.push(volume);
    }
    Ok(channels)
}

pub fn run(args: &ApplyArgs) -> Result<()> {
    validate_name("method name", &args.method_name)?;
    let model = CascadeModel::load(&args.model)
        .map_err(|e| crate::manifest::annotate(e, &args.model.display().to_string()))?;
    let plan = channel_plan(&model, &args.prior_channel)?;

    let base = args
        .manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let mut manifest = Manifest::load(&args.manifest)?;
    manifest.prune_missing(&base, args.skip_missing, |case| {
        plan.iter()
            .filter_map(|n| case.channels.get(n).cloned())
            .collect()
    })?;

    let mut provenance = Provenance::new("apply", args)?;
    provenance.add_input(&args.model.display().to_string(), &args.model)?;
    provenance.add_input(&args.manifest.display().to_string(), &args.manifest)?;
    for case in &manifest.cases {
        for name in &plan {
            if let Some(rel) = case.channels.get(name) {
                provenance.add_input(rel, &resolve(&base, rel))?;
            }
        }
    }

    fs::create_dir_all(&args.out_dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", args.out_dir.display()),
        ))
    })?;

    let predictions: Vec<(ProbabilityMap, BinaryMask)> = manifest
        .cases
        .par_iter()
        .map(|case| -> Result<(ProbabilityMap, BinaryMask)> {
            let channels = case_channels(&base, case, &plan, &args.prior_channel)?;
            apply_cascade(&model, &channels)
        })
        .collect::<Result<Vec<_>>>()?;

    let ext = args.format.extension();
    let mut entries = Vec::with_capacity(manifest.cases.len());
    for (case, (prob, mask)) in manifest.cases.iter().zip(&predictions) {
        let prob_file = format!("{}_prob.{ext}", case.id);
        let mask_file = format!("{}_mask.{ext}", case.id);
        write_volume(
            prob.volume(),
            args.out_dir.join(&prob_file),
            args.format.format(),
        )?;
        write_volume(
            mask.volume(),
            args.out_dir.join(&mask_file),
            args.format.format(),
        )?;
        println!("wrote {}", args.out_dir.join(&prob_file).display());
        println!("wrote {}", args.out_dir.join(&mask_file).display());

        // Ground truth rebased onto the output directory when that is
        // expressible, so the emitted manifest works from its own
        // location.
        let gt = case.gt.as_ref().map(|rel| {
            let resolved = resolve(&base, rel);
            relative_from(&resolved, &args.out_dir)
                .unwrap_or(resolved)
                .to_string_lossy()
                .into_owned()
        });
        entries.push(CaseEntry {
            id: case.id.clone(),
            gt,
            scanner: case.scanner.clone(),
            tlv_ml: case.tlv_ml,
            channels: BTreeMap::new(),
            methods: BTreeMap::from([(args.method_name.clone(), prob_file)]),
        });
    }

    let out_manifest = Manifest {
        provenance: Some(serde_json::to_value(&provenance).map_err(|e| {
            Error::InvariantViolation(format!("provenance serialization: {e}"))
        })?),
        channels: Vec::new(),
        cases: entries,
    };
    let manifest_path = args.out_dir.join("manifest.json");
    crate::provenance::write_json_artifact(&manifest_path, &out_manifest)?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}
