//! `eval`: one predicted mask against one ground-truth mask.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use lesionbench_core::metrics::{evaluate_pair_with, FilterSide, MetricsReport};
use lesionbench_core::{Connectivity, Result};

use crate::commands::{report_row, Format, REPORT_COLUMNS};
use crate::manifest::load_mask;
use crate::provenance::{write_csv_artifact, write_json_artifact, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    /// Filter both masks (keeps lesion-rate denominators consistent).
    Both,
    /// Filter the prediction only, as some challenge protocols do.
    Pred,
    /// Filter the ground truth only.
    Gt,
}

impl SideArg {
    fn side(self) -> FilterSide {
        match self {
            SideArg::Both => FilterSide::Both,
            SideArg::Pred => FilterSide::PredOnly,
            SideArg::Gt => FilterSide::GtOnly,
        }
    }
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    /// Predicted binary mask volume.
    #[arg(long)]
    pub pred: PathBuf,

    /// Ground-truth binary mask volume.
    #[arg(long)]
    pub gt: PathBuf,

    /// Voxel neighborhood defining connected components: 6, 18, or 26.
    #[arg(long, default_value_t = 26)]
    pub connectivity: u8,

    /// Minimum lesion size in mm³; smaller components are dropped before
    /// any metric is computed.
    #[arg(long, default_value_t = 0.0)]
    pub min_mm3: f64,

    /// Which mask(s) the minimum-size filter applies to.
    #[arg(long, value_enum, default_value_t = SideArg::Both)]
    pub side: SideArg,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalArtifact<'a> {
    provenance: &'a Provenance,
    report: &'a MetricsReport,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let connectivity = Connectivity::from_u8(args.connectivity)?;
    let mut provenance = Provenance::new("eval", args)?;
    provenance.add_input(&args.pred.display().to_string(), &args.pred)?;
    provenance.add_input(&args.gt.display().to_string(), &args.gt)?;

    let pred = load_mask(&args.pred.display().to_string(), &args.pred)?;
    let gt = load_mask(&args.gt.display().to_string(), &args.gt)?;
    let report = evaluate_pair_with(&pred, &gt, connectivity, args.min_mm3, args.side.side())?;

    match (args.format, &args.out) {
        (Format::Json, Some(path)) => {
            write_json_artifact(
                path,
                &EvalArtifact {
                    provenance: &provenance,
                    report: &report,
                },
            )?;
            println!("wrote {}", path.display());
        }
        (Format::Json, None) => {
            println!(
                "{}",
                crate::provenance::render_json_artifact(&EvalArtifact {
                    provenance: &provenance,
                    report: &report,
                })?
            );
        }
        (Format::Csv, Some(path)) => {
            write_csv_artifact(path, &provenance, REPORT_COLUMNS, &[report_row(&report)])?;
            println!("wrote {}", path.display());
        }
        (Format::Csv, None) => {
            println!("{}", provenance.comment_line()?);
            println!("{REPORT_COLUMNS}");
            println!("{}", report_row(&report));
        }
    }
    Ok(())
}
