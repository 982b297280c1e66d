//! `bland-altman`: bias and limits of agreement for paired measurements.
//!
//! Input is a CSV of two numeric columns per line, `pred,gt`; an
//! optional header row is skipped. Differences are prediction minus
//! ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use lesionbench_core::stats::{bland_altman, BlandAltman};
use lesionbench_core::{Error, Result};

use crate::commands::Format;
use crate::provenance::{
    fmt_f64, render_json_artifact, write_csv_artifact, write_json_artifact, Provenance,
};

#[derive(Args, Serialize)]
pub struct BlandAltmanArgs {
    /// CSV of paired measurements: `pred,gt` per line.
    #[arg(long)]
    pub pairs: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AgreementArtifact<'a> {
    provenance: &'a Provenance,
    agreement: &'a BlandAltman,
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let parsed = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(a), Ok(b)) => Some((a, b)),
                // A header row is the one non-numeric line allowed.
                _ if i == 0 => None,
                _ => {
                    return Err(Error::CorruptFile(format!(
                        "{}: line {} is not a numeric pair: {line:?}",
                        path.display(),
                        i + 1
                    )))
                }
            },
            _ => {
                return Err(Error::CorruptFile(format!(
                    "{}: line {} does not hold exactly two fields: {line:?}",
                    path.display(),
                    i + 1
                )))
            }
        };
        if let Some(pair) = parsed {
            pairs.push(pair);
        }
    }
    Ok(pairs)
}

pub fn run(args: &BlandAltmanArgs) -> Result<()> {
    let mut provenance = Provenance::new("bland-altman", args)?;
    provenance.add_input(&args.pairs.display().to_string(), &args.pairs)?;

    let pairs = read_pairs(&args.pairs)?;
    let agreement = bland_altman(&pairs)?;

    let csv_row = format!(
        "{},{},{},{},{}",
        agreement.pairs.len(),
        fmt_f64(agreement.mean_diff),
        fmt_f64(agreement.sd_diff),
        fmt_f64(agreement.loa_low),
        fmt_f64(agreement.loa_high)
    );
    const COLUMNS: &str = "n_pairs,mean_diff,sd_diff,loa_low,loa_high";

    match (args.format, &args.out) {
        (Format::Json, Some(path)) => {
            write_json_artifact(
                path,
                &AgreementArtifact {
                    provenance: &provenance,
                    agreement: &agreement,
                },
            )?;
            println!("wrote {}", path.display());
        }
        (Format::Json, None) => {
            println!(
                "{}",
                render_json_artifact(&AgreementArtifact {
                    provenance: &provenance,
                    agreement: &agreement,
                })?
            );
        }
        (Format::Csv, Some(path)) => {
            write_csv_artifact(path, &provenance, COLUMNS, &[csv_row])?;
            println!("wrote {}", path.display());
        }
        (Format::Csv, None) => {
            println!("{}", provenance.comment_line()?);
            println!("{COLUMNS}");
            println!("{csv_row}");
        }
    }
    Ok(())
}
