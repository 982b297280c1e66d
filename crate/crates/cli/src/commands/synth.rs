//! `synth`: generate a phantom cohort whose exact metric outcomes are
//! known by construction.
//!
//! Beside the volumes, each case gets a manifest describing every lesion
//! and decoy blob, and the output directory gets a cohort manifest the
//! `train`, `apply`, `cohort`, and `roc` commands consume directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use lesionbench_core::io::write_volume;
use lesionbench_core::phantom::{generate_cohort, preset_spec, PhantomManifest, PresetKind};
use lesionbench_core::{Error, Result};

use crate::commands::VolumeFormatArg;
use crate::manifest::{CaseEntry, Manifest};
use crate::provenance::{write_json_artifact, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    /// Lesions glow in both channels; cleanly separable.
    Separable,
    /// Decoy blobs mimic lesions in channel 0 only, so an intensity cut
    /// admits them while a second stage can reject them.
    Stage1Fooling,
    /// Lesion contrast near the noise floor.
    Hard,
}

impl PresetArg {
    fn kind(self) -> PresetKind {
        match self {
            PresetArg::Separable => PresetKind::Separable,
            PresetArg::Stage1Fooling => PresetKind::Stage1Fooling,
            PresetArg::Hard => PresetKind::Hard,
        }
    }
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// Phantom family to generate.
    #[arg(long, value_enum)]
    pub preset: PresetArg,

    /// Number of cases.
    #[arg(long)]
    pub cases: u64,

    /// Generator seed. Always explicit; equal seeds give byte-identical
    /// cohorts.
    #[arg(long)]
    pub seed: u64,

    /// Directory the volumes and manifests are written into.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Container for the written volumes.
    #[arg(long, value_enum, default_value_t = VolumeFormatArg::Nifti)]
    pub format: VolumeFormatArg,
}

#[derive(Serialize)]
struct CaseArtifact<'a> {
    provenance: &'a Provenance,
    manifest: &'a PhantomManifest,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let provenance = Provenance::new("synth", args)?;
    let spec = preset_spec(args.preset.kind(), args.seed);
    let cohort = generate_cohort(&spec, args.cases)?;

    fs::create_dir_all(&args.out_dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", args.out_dir.display()),
        ))
    })?;

    let ext = args.format.extension();
    let mut entries = Vec::with_capacity(cohort.len());
    for case in &cohort {
        let id = format!("case{:03}", case.case_index);
        let mut channel_paths = BTreeMap::new();
        for (volume, name) in case.channels.iter().zip(&case.manifest.channels) {
            let file = format!("{id}_{name}.{ext}");
            write_volume(volume, args.out_dir.join(&file), args.format.format())?;
            channel_paths.insert(name.clone(), file);
        }
        let gt_file = format!("{id}_gt.{ext}");
        write_volume(
            case.gt.volume(),
            args.out_dir.join(&gt_file),
            args.format.format(),
        )?;
        write_json_artifact(
            &args.out_dir.join(format!("{id}_manifest.json")),
            &CaseArtifact {
                provenance: &provenance,
                manifest: &case.manifest,
            },
        )?;

        let tlv_ml = case
            .manifest
            .lesions
            .iter()
            .map(|l| l.volume_mm3)
            .sum::<f64>()
            / 1000.0;
        entries.push(CaseEntry {
            id,
            gt: Some(gt_file),
            scanner: Some("phantom".to_string()),
            tlv_ml: Some(tlv_ml),
            channels: channel_paths,
            methods: BTreeMap::new(),
        });
    }

    let cohort_manifest = Manifest {
        provenance: Some(serde_json::to_value(&provenance).map_err(|e| {
            Error::InvariantViolation(format!("provenance serialization: {e}"))
        })?),
        channels: spec.channels.iter().map(|c| c.name.clone()).collect(),
        cases: entries,
    };
    let manifest_path = args.out_dir.join("manifest.json");
    write_json_artifact(&manifest_path, &cohort_manifest)?;

    println!(
        "wrote {} case(s) and {}",
        cohort.len(),
        manifest_path.display()
    );
    Ok(())
}
