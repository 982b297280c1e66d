//! The pluggable classifier interface and the on-disk cascade model
//! archive.
//!
//! A trained cascade serializes to a single JSON document: configuration
//! in plain fields, each stage as a `{kind, payload}` envelope. Loading
//! resolves `kind` against the built-in registry (the kNN reference
//! classifier and the constant fallback). Custom classifiers can be
//! trained and applied in-process, but only registry kinds round-trip
//! through files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::KnnModel;
use crate::conncomp::Connectivity;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pipeline::{HistogramReference, Patch, PatchSpec};

/// Current archive format version; bumped on breaking layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

const ARCHIVE_FORMAT_NAME: &str = "cascade-model";

/// A trained probabilistic voxel classifier.
pub trait Classifier: Send + Sync {
    /// Stable identifier used in model archives (e.g. "knn").
    fn kind(&self) -> &'static str;

    /// Lesion probability in [0, 1] for one patch.
    fn predict(&self, patch: &Patch) -> Result<f64>;

    /// Trained state as a JSON payload for the archive.
    fn save_payload(&self) -> Result<serde_json::Value>;
}

/// Trains a classifier from labeled, class-balanced patches. The cascade
/// invokes it once per stage.
pub type ClassifierFactory = dyn Fn(&[Patch]) -> Result<Box<dyn Classifier>> + Send + Sync;

/// Degenerate fallback emitting one fixed probability. The cascade
/// installs it as stage 2 when that stage's training pool collapses to a
/// single class — on cleanly separable data there may be nothing left to
/// learn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantClassifier {
    probability: f64,
}

impl ConstantClassifier {
    /// # Errors
    ///
    /// `invalid-threshold` outside [0, 1].
    pub fn new(probability: f64) -> Result<Self> {
        if !(probability.is_finite() && (0.0..=1.0).contains(&probability)) {
            return Err(Error::InvalidThreshold(probability));
        }
        Ok(ConstantClassifier { probability })
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

impl Classifier for ConstantClassifier {
    fn kind(&self) -> &'static str {
        "constant"
    }

    fn predict(&self, _patch: &Patch) -> Result<f64> {
        Ok(self.probability)
    }

    fn save_payload(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::InvariantViolation(e.to_string()))
    }
}

/// A trained two-stage cascade plus everything needed to reproduce its
/// decisions: patch layout, thresholds, per-channel normalization
/// references, and the training seed.
pub struct CascadeModel {
    pub patch_spec: PatchSpec,
    /// Candidate cut as a fraction of mean foreground intensity.
    pub candidate_frac: f64,
    /// Stage-1 probability above which a candidate reaches stage 2.
    pub stage1_threshold: f64,
    /// Final mask threshold chosen on validation cases.
    pub binarization_threshold: f64,
    /// Minimum lesion size applied to the final mask.
    pub min_lesion_mm3: f64,
    pub connectivity: Connectivity,
    /// Per-channel normalization reference; `None` for channels exempt
    /// from histogram matching (the prior) or when matching is off.
    pub histogram_refs: Vec<Option<HistogramReference>>,
    pub seed: u64,
    pub stage1: Box<dyn Classifier>,
    pub stage2: Box<dyn Classifier>,
}

impl fmt::Debug for CascadeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CascadeModel")
            .field("patch_spec", &self.patch_spec)
            .field("candidate_frac", &self.candidate_frac)
            .field("stage1_threshold", &self.stage1_threshold)
            .field("binarization_threshold", &self.binarization_threshold)
            .field("min_lesion_mm3", &self.min_lesion_mm3)
            .field("connectivity", &self.connectivity)
            .field("seed", &self.seed)
            .field("stage1", &self.stage1.kind())
            .field("stage2", &self.stage2.kind())
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
struct ClassifierEntry {
    kind: String,
    payload: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ModelArchive {
    format: String,
    version: u32,
    patch_spec: PatchSpec,
    candidate_frac: f64,
    stage1_threshold: f64,
    binarization_threshold: f64,
    min_lesion_mm3: f64,
    connectivity: Connectivity,
    histogram_refs: Vec<Option<HistogramReference>>,
    seed: u64,
    stage1: ClassifierEntry,
    stage2: ClassifierEntry,
}

fn load_classifier(entry: &ClassifierEntry) -> Result<Box<dyn Classifier>> {
    match entry.kind.as_str() {
        "knn" => {
            let model: KnnModel = serde_json::from_value(entry.payload.clone())
                .map_err(|e| Error::CorruptFile(format!("knn payload: {e}")))?;
            model.validate()?;
            Ok(Box::new(model))
        }
        "constant" => {
            let model: ConstantClassifier = serde_json::from_value(entry.payload.clone())
                .map_err(|e| Error::CorruptFile(format!("constant payload: {e}")))?;
            if !(model.probability.is_finite() && (0.0..=1.0).contains(&model.probability)) {
                return Err(Error::CorruptFile(
                    "constant classifier probability outside [0, 1]".to_string(),
                ));
            }
            Ok(Box::new(model))
        }
        other => Err(Error::CorruptFile(format!(
            "unknown classifier kind {other:?}"
        ))),
    }
}

impl CascadeModel {
    fn save_entry(classifier: &dyn Classifier) -> Result<ClassifierEntry> {
        Ok(ClassifierEntry {
            kind: classifier.kind().to_string(),
            payload: classifier.save_payload()?,
        })
    }

    /// The archive as a JSON string. Field order is fixed, so equal
    /// models produce byte-identical archives.
    pub fn to_json(&self) -> Result<String> {
        let archive = ModelArchive {
            format: ARCHIVE_FORMAT_NAME.to_string(),
            version: MODEL_FORMAT_VERSION,
            patch_spec: self.patch_spec.clone(),
            candidate_frac: self.candidate_frac,
            stage1_threshold: self.stage1_threshold,
            binarization_threshold: self.binarization_threshold,
            min_lesion_mm3: self.min_lesion_mm3,
            connectivity: self.connectivity,
            histogram_refs: self.histogram_refs.clone(),
            seed: self.seed,
            stage1: Self::save_entry(self.stage1.as_ref())?,
            stage2: Self::save_entry(self.stage2.as_ref())?,
        };
        serde_json::to_string_pretty(&archive)
            .map_err(|e| Error::InvariantViolation(format!("model serialization: {e}")))
    }

    /// Writes the archive atomically (temp file + rename).
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut bytes = self.to_json()?.into_bytes();
        bytes.push(b'\n');
        write_atomic(path.as_ref(), &bytes)
    }

    /// Parses an archive produced by [`CascadeModel::to_json`].
    ///
    /// # Errors
    ///
    /// `corrupt-file` on malformed JSON, a wrong format tag or version,
    /// an unknown classifier kind, or out-of-range thresholds.
    pub fn from_json(text: &str) -> Result<CascadeModel> {
        let archive: ModelArchive = serde_json::from_str(text)
            .map_err(|e| Error::CorruptFile(format!("model archive: {e}")))?;
        if archive.format != ARCHIVE_FORMAT_NAME {
            return Err(Error::CorruptFile(format!(
                "not a cascade model archive (format {:?})",
                archive.format
            )));
        }
        if archive.version != MODEL_FORMAT_VERSION {
            return Err(Error::CorruptFile(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                archive.version
            )));
        }
        for (name, value) in [
            ("stage1_threshold", archive.stage1_threshold),
            ("binarization_threshold", archive.binarization_threshold),
        ] {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(Error::CorruptFile(format!("{name} outside [0, 1]")));
            }
        }
        if archive.histogram_refs.len() != archive.patch_spec.n_channels() {
            return Err(Error::CorruptFile(
                "histogram reference count differs from channel count".to_string(),
            ));
        }
        Ok(CascadeModel {
            patch_spec: archive.patch_spec,
            candidate_frac: archive.candidate_frac,
            stage1_threshold: archive.stage1_threshold,
            binarization_threshold: archive.binarization_threshold,
            min_lesion_mm3: archive.min_lesion_mm3,
            connectivity: archive.connectivity,
            histogram_refs: archive.histogram_refs,
            seed: archive.seed,
            stage1: load_classifier(&archive.stage1)?,
            stage2: load_classifier(&archive.stage2)?,
        })
    }

    /// Reads and parses an archive file.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<CascadeModel> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> CascadeModel {
        CascadeModel {
            patch_spec: PatchSpec::new(3, vec!["FLAIR".to_string()]).unwrap(),
            candidate_frac: 1.0,
            stage1_threshold: 0.5,
            binarization_threshold: 0.4,
            min_lesion_mm3: 0.0,
            connectivity: Connectivity::TwentySix,
            histogram_refs: vec![None],
            seed: 7,
            stage1: Box::new(ConstantClassifier::new(0.9).unwrap()),
            stage2: Box::new(ConstantClassifier::new(0.8).unwrap()),
        }
    }

    #[test]
    fn constant_classifier_contract() {
        let c = ConstantClassifier::new(0.25).unwrap();
        let patch = Patch {
            center: (0, 0, 0),
            edge: 1,
            n_channels: 1,
            values: vec![0.0],
            label: None,
            padded: false,
        };
        assert_eq!(c.predict(&patch).unwrap(), 0.25);
        assert_eq!(c.kind(), "constant");
        assert_eq!(
            ConstantClassifier::new(1.5).unwrap_err().code(),
            "invalid-threshold"
        );
    }

    #[test]
    fn archive_round_trip() {
        let model = toy_model();
        let json = model.to_json().unwrap();
        let back = CascadeModel::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(back.patch_spec, model.patch_spec);
        assert_eq!(back.binarization_threshold, model.binarization_threshold);
        assert_eq!(back.stage1.kind(), "constant");
    }

    #[test]
    fn archive_is_versioned_and_typed() {
        let json = toy_model().to_json().unwrap();
        let wrong_version = json.replacen("\"version\": 1", "\"version\": 99", 1);
        assert_eq!(
            CascadeModel::from_json(&wrong_version).unwrap_err().code(),
            "corrupt-file"
        );
        let wrong_format = json.replacen("cascade-model", "something-else", 1);
        assert_eq!(
            CascadeModel::from_json(&wrong_format).unwrap_err().code(),
            "corrupt-file"
        );
        assert_eq!(
            CascadeModel::from_json("{not json").unwrap_err().code(),
            "corrupt-file"
        );
    }

    #[test]
    fn unknown_classifier_kind_is_rejected() {
        let json = toy_model().to_json().unwrap().replacen(
            "\"kind\": \"constant\"",
            "\"kind\": \"transformer\"",
            1,
        );
        assert_eq!(CascadeModel::from_json(&json).unwrap_err().code(), "corrupt-file");
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = toy_model();
        model.save(&path).unwrap();
        let back = CascadeModel::load(&path).unwrap();
        assert_eq!(back.to_json().unwrap(), model.to_json().unwrap());
    }
}
