//! `match-hist`: remap a volume's foreground intensities onto a
//! reference histogram. Several references pool into one cohort-wide
//! target, matching what training does internally.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use lesionbench_core::io::write_volume;
use lesionbench_core::pipeline::{histogram_match_to, HistogramReference};
use lesionbench_core::{Result, Volume};

use crate::commands::VolumeFormatArg;
use crate::manifest::load_volume;
use crate::provenance::{write_json_artifact, Provenance};

#[derive(Args, Serialize)]
pub struct MatchHistArgs {
    /// Volume to remap.
    #[arg(long)]
    pub src: PathBuf,

    /// Reference volume; repeat the flag to pool several.
    #[arg(long, required = true)]
    pub reference: Vec<PathBuf>,

    /// Output volume; a `.provenance.json` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,

    /// Container for the written volume.
    #[arg(long, value_enum, default_value_t = VolumeFormatArg::Nifti)]
    pub format: VolumeFormatArg,
}

pub fn run(args: &MatchHistArgs) -> Result<()> {
    let mut provenance = Provenance::new("match-hist", args)?;
    provenance.add_input(&args.src.display().to_string(), &args.src)?;
    for path in &args.reference {
        provenance.add_input(&path.display().to_string(), path)?;
    }

    let src = load_volume(&args.src.display().to_string(), &args.src)?;
    let references: Vec<Volume> = args
        .reference
        .iter()
        .map(|p| load_volume(&p.display().to_string(), p))
        .collect::<Result<Vec<_>>>()?;
    let pooled = HistogramReference::from_volumes(&references.iter().collect::<Vec<_>>())?;
    let matched = histogram_match_to(&src, &pooled)?;

    write_volume(&matched, &args.out, args.format.format())?;
    println!("wrote {}", args.out.display());

    let mut sidecar = args.out.as_os_str().to_os_string();
    sidecar.push(".provenance.json");
    let sidecar = PathBuf::from(sidecar);
    write_json_artifact(&sidecar, &provenance)?;
    println!("wrote {}", sidecar.display());
    Ok(())
}
