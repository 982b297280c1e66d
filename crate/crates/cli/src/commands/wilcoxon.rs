//! `wilcoxon`: paired two-sided signed-rank test on two sample files.
//!
//! Each input is a text file with one number per line (blank lines and
//! `#` comments ignored); values pair by line position.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use lesionbench_core::stats::{
    wilcoxon_signed_rank_opts, WilcoxonMethod, WilcoxonOptions, WilcoxonResult, ZeroPolicy,
};
use lesionbench_core::{Error, Result};

use crate::commands::Format;
use crate::provenance::{
    fmt_f64, render_json_artifact, write_csv_artifact, write_json_artifact, Provenance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroPolicyArg {
    /// Discard zero differences before ranking (classic Wilcoxon).
    Drop,
    /// Rank zero differences, then drop their ranks from the sums.
    Pratt,
}

impl ZeroPolicyArg {
    fn policy(self) -> ZeroPolicy {
        match self {
            ZeroPolicyArg::Drop => ZeroPolicy::Drop,
            ZeroPolicyArg::Pratt => ZeroPolicy::Pratt,
        }
    }
}

#[derive(Args, Serialize)]
pub struct WilcoxonArgs {
    /// First sample: one number per line.
    #[arg(long)]
    pub a: PathBuf,

    /// Second sample, paired with the first by line position.
    #[arg(long)]
    pub b: PathBuf,

    #[arg(long, value_enum, default_value_t = ZeroPolicyArg::Drop)]
    pub zero_policy: ZeroPolicyArg,

    /// Largest effective n for which the exact null distribution is
    /// enumerated; larger samples use the normal approximation.
    #[arg(long, default_value_t = 25)]
    pub exact_limit: usize,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct WilcoxonArtifact<'a> {
    provenance: &'a Provenance,
    result: &'a WilcoxonResult,
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::CorruptFile(format!(
                "{}: line {} is not a number: {line:?}",
                path.display(),
                i + 1
            ))
        })?;
        values.push(v);
    }
    Ok(values)
}

fn method_name(m: WilcoxonMethod) -> &'static str {
    match m {
        WilcoxonMethod::Exact => "exact",
        WilcoxonMethod::NormalApprox => "normal-approx",
    }
}

pub fn run(args: &WilcoxonArgs) -> Result<()> {
    let mut provenance = Provenance::new("wilcoxon", args)?;
    provenance.add_input(&args.a.display().to_string(), &args.a)?;
    provenance.add_input(&args.b.display().to_string(), &args.b)?;

    let a = read_samples(&args.a)?;
    let b = read_samples(&args.b)?;
    let opts = WilcoxonOptions {
        zero_policy: args.zero_policy.policy(),
        exact_limit: args.exact_limit,
    };
    let result = wilcoxon_signed_rank_opts(&a, &b, &opts)?;
    if result.is_degenerate() {
        eprintln!("wilcoxon: degenerate — every paired difference is zero; p = 1");
    }

    let csv_row = format!(
        "{},{},{},{}",
        result.n_effective,
        fmt_f64(result.w),
        fmt_f64(result.p_value),
        method_name(result.method)
    );
    const COLUMNS: &str = "n_effective,w,p_value,method";

    match (args.format, &args.out) {
        (Format::Json, Some(path)) => {
            write_json_artifact(
                path,
                &WilcoxonArtifact {
                    provenance: &provenance,
                    result: &result,
                },
            )?;
            println!("wrote {}", path.display());
        }
        (Format::Json, None) => {
            println!(
                "{}",
                render_json_artifact(&WilcoxonArtifact {
                    provenance: &provenance,
                    result: &result,
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
