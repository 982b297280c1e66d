//! The cohort manifest: one JSON file listing cases in a fixed order.
//!
//! The manifest is an explicit list rather than a directory scan because
//! its order is meaningful — paired statistics match cases by position,
//! and every table and sweep iterates cases in manifest order. Paths
//! inside the file are resolved relative to the manifest's own
//! directory, so a cohort ships as a self-contained tree.
//!
//! One schema serves every command; each command states which fields it
//! needs. `gt` names the ground-truth mask; `channels` maps channel
//! names (keyed by the top-level `channels` order) to input volumes for
//! training and application; `methods` maps method names to predicted
//! volumes for evaluation. `tlv_ml` and `scanner` are stratification
//! metadata — total lesion volume is derived from the ground truth when
//! absent.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use lesionbench_core::io::read_volume;
use lesionbench_core::{BinaryMask, Error, ProbabilityMap, Result, Volume};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// How this manifest came to be; written by commands that emit
    /// manifests, ignored on read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    /// Channel order for training and application. Names key into each
    /// case's `channels` map.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<String>,
    pub cases: Vec<CaseEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scanner: Option<String>,
    /// Total lesion volume in ml.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tlv_ml: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub channels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub methods: BTreeMap<String, String>,
}

impl CaseEntry {
    /// The ground-truth path, for commands that cannot work without one.
    pub fn gt_path(&self) -> Result<&str> {
        self.gt.as_deref().ok_or_else(|| {
            Error::InvalidKey(format!("case {:?} has no ground-truth path (`gt`)", self.id))
        })
    }
}

/// Case ids, method names, and channel names become file names and CSV
/// cells, so they are restricted to a safe alphabet up front.
pub fn validate_name(kind: &str, name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidKey(format!(
            "{kind} {name:?} must be non-empty and use only [A-Za-z0-9._-]"
        )))
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::InsufficientData(
                "manifest lists no cases".to_string(),
            ));
        }
        let mut seen = BTreeSet::new();
        for case in &self.cases {
            validate_name("case id", &case.id)?;
            if !seen.insert(case.id.as_str()) {
                return Err(Error::InvalidKey(format!(
                    "duplicate case id {:?}",
                    case.id
                )));
            }
            for name in case.methods.keys() {
                validate_name("method name", name)?;
            }
            for name in case.channels.keys() {
                validate_name("channel name", name)?;
            }
        }
        for name in &self.channels {
            validate_name("channel name", name)?;
        }
        Ok(())
    }

    /// Method names, which must be identical across cases so that every
    /// table and pairing covers the full cohort.
    pub fn method_names(&self) -> Result<Vec<String>> {
        let first: Vec<String> = self.cases[0].methods.keys().cloned().collect();
        for case in &self.cases[1..] {
            let names: Vec<&String> = case.methods.keys().collect();
            if names.len() != first.len() || names.iter().zip(&first).any(|(a, b)| *a != b) {
                return Err(Error::InvalidKey(format!(
                    "case {:?} lists methods [{}] but case {:?} lists [{}]; every case must name the same methods",
                    case.id,
                    names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
                    self.cases[0].id,
                    first.join(", "),
                )));
            }
        }
        if first.is_empty() {
            return Err(Error::InsufficientData(
                "manifest cases list no methods to evaluate".to_string(),
            ));
        }
        Ok(first)
    }

    /// The channel-order list, which training and application require.
    pub fn channel_order(&self) -> Result<&[String]> {
        if self.channels.is_empty() {
            return Err(Error::InvalidKey(
                "manifest has no top-level `channels` list; training and application need an explicit channel order".to_string(),
            ));
        }
        for case in &self.cases {
            for name in &self.channels {
                if !case.channels.contains_key(name) {
                    return Err(Error::ChannelMismatch(format!(
                        "case {:?} has no path for channel {name:?}",
                        case.id
                    )));
                }
            }
        }
        Ok(&self.channels)
    }

    /// Drops every case that references a missing file, or fails after
    /// listing them. Whole cases are dropped — never single files — so
    /// the surviving list stays aligned across methods and pairing by
    /// position remains valid.
    pub fn prune_missing<F>(&mut self, base: &Path, skip_missing: bool, paths_of: F) -> Result<()>
    where
        F: Fn(&CaseEntry) -> Vec<String>,
    {
        let mut missing: Vec<(String, String)> = Vec::new();
        let mut keep: Vec<bool> = Vec::with_capacity(self.cases.len());
        for case in &self.cases {
            let absent: Vec<String> = paths_of(case)
                .into_iter()
                .filter(|p| !resolve(base, p).is_file())
                .collect();
            keep.push(absent.is_empty());
            missing.extend(absent.into_iter().map(|p| (case.id.clone(), p)));
        }
        if missing.is_empty() {
            return Ok(());
        }
        for (id, path) in &missing {
            eprintln!("missing: {path} (case {id})");
        }
        if !skip_missing {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!(
                    "{} case file(s) missing; pass --skip-missing to drop the affected cases",
                    missing.len()
                ),
            )));
        }
        let before = self.cases.len();
        let mut it = keep.iter();
        self.cases.retain(|_| *it.next().expect("one flag per case"));
        eprintln!(
            "skip-missing: dropped {} of {before} cases",
            before - self.cases.len()
        );
        if self.cases.is_empty() {
            return Err(Error::InsufficientData(
                "every case referenced a missing file".to_string(),
            ));
        }
        Ok(())
    }
}

/// Interprets a manifest-relative path. Absolute paths pass through.
pub fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Prefixes file-shaped failures with the path they came from, so a
/// cohort-sized run names the offending file instead of just the way it
/// failed.
pub fn annotate(err: Error, path: &str) -> Error {
    match err {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{path}: {io}"))),
        Error::CorruptFile(s) => Error::CorruptFile(format!("{path}: {s}")),
        Error::InvalidHeader(s) => Error::InvalidHeader(format!("{path}: {s}")),
        Error::UnsupportedDtype(s) => Error::UnsupportedDtype(format!("{path}: {s}")),
        Error::InvariantViolation(s) => Error::InvariantViolation(format!("{path}: {s}")),
        other => other,
    }
}

pub fn load_volume(display: &str, path: &Path) -> Result<Volume> {
    read_volume(path).map_err(|e| annotate(e, display))
}

pub fn load_mask(display: &str, path: &Path) -> Result<BinaryMask> {
    BinaryMask::new(load_volume(display, path)?).map_err(|e| annotate(e, display))
}

pub fn load_probability(display: &str, path: &Path) -> Result<ProbabilityMap> {
    ProbabilityMap::new(load_volume(display, path)?).map_err(|e| annotate(e, display))
}

/// Re-expresses `target` relative to the directory `base` when both are
/// plain paths on the same root; `None` when that is not expressible
/// (mixed absolute/relative, or `..` underflow). Callers fall back to
/// the resolved path itself.
pub fn relative_from(target: &Path, base: &Path) -> Option<PathBuf> {
    if target.is_absolute() != base.is_absolute() {
        return None;
    }
    let normalize = |p: &Path| -> Option<Vec<std::ffi::OsString>> {
        let mut out: Vec<std::ffi::OsString> = Vec::new();
        for c in p.components() {
            match c {
                Component::CurDir => {}
                Component::RootDir | Component::Prefix(_) => {
                    out.push(c.as_os_str().to_os_string())
                }
                Component::Normal(s) => out.push(s.to_os_string()),
                Component::ParentDir => {
                    out.pop()?;
                }
            }
        }
        Some(out)
    };
    let t = normalize(target)?;
    let b = normalize(base)?;
    let shared = t.iter().zip(&b).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in shared..b.len() {
        out.push("..");
    }
    for part in &t[shared..] {
        out.push(part);
    }
    if out.as_os_str().is_empty() {
        out.push(".");
    }
    Some(out)
}
