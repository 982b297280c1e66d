//! The provenance block embedded in every artifact, plus the small
//! shared machinery for writing them.
//!
//! `config` holds the parsed command arguments with paths exactly as
//! given, so the block doubles as a recipe: re-running the tool with
//! that configuration from the same working directory rewrites the
//! artifact byte for byte. The worker-thread count is deliberately not
//! part of it — results never depend on scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use lesionbench_core::io::write_atomic;
use lesionbench_core::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    /// The path as the command received it, not canonicalized.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &'static str, config: &C) -> Result<Provenance> {
        let config = serde_json::to_value(config).map_err(|e| {
            Error::InvariantViolation(format!("provenance config serialization: {e}"))
        })?;
        Ok(Provenance {
            tool: "lesionbench",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: Vec::new(),
        })
    }

    /// Records one input file under `display` (the path as the user wrote
    /// it) while hashing the bytes at `resolved`.
    pub fn add_input(&mut self, display: &str, resolved: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: display.to_string(),
            sha256: sha256_hex(resolved)?,
        });
        Ok(())
    }

    /// The single comment line carrying the block in CSV outputs.
    pub fn comment_line(&self) -> Result<String> {
        let json = serde_json::to_string(self).map_err(|e| {
            Error::InvariantViolation(format!("provenance serialization: {e}"))
        })?;
        Ok(format!("# provenance: {json}"))
    }
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(sha256_hex_of(&bytes))
}

pub fn sha256_hex_of(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut out = String::with_capacity(64);
    for b in hasher.finalize() {
        write!(out, "{b:02x}").expect("formatting into a String cannot fail");
    }
    out
}

/// Serializes a full artifact (a struct whose first field is the
/// provenance block) as pretty JSON with a trailing newline and writes
/// it atomically.
pub fn write_json_artifact<T: Serialize>(path: &Path, artifact: &T) -> Result<()> {
    let mut text = render_json_artifact(artifact)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn render_json_artifact<T: Serialize>(artifact: &T) -> Result<String> {
    serde_json::to_string_pretty(artifact)
        .map_err(|e| Error::InvariantViolation(format!("artifact serialization: {e}")))
}

/// Assembles a CSV artifact: provenance comment, header, rows — and
/// writes it atomically. Column sets are part of the compatibility
/// contract; rows only ever gain trailing columns in new versions.
pub fn write_csv_artifact(
    path: &Path,
    provenance: &Provenance,
    header: &str,
    rows: &[String],
) -> Result<()> {
    let mut text = String::new();
    text.push_str(&provenance.comment_line()?);
    text.push('\n');
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Shortest round-trip decimal form, the same notation `serde_json`
/// emits, so CSV and JSON artifacts agree on every digit.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Undefined metrics become empty cells rather than sentinel numbers.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
