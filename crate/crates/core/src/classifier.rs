//! The reference voxel classifier: exact k-nearest-neighbor voting over
//! compact per-channel patch features.
//!
//! Each patch reduces to three features per channel — center intensity,
//! patch mean, patch variance — standardized by the training
//! distribution. Prediction is the lesion fraction among the k nearest
//! training points by Euclidean distance, with ties at the k-th distance
//! broken by training insertion order. Everything is exact and
//! deterministic; training sets are small after class balancing, so no
//! approximate index is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Classifier, ClassifierFactory, Patch};

/// Customary neighbor count.
pub const DEFAULT_K: usize = 5;

/// The raw (unstandardized) feature vector: center intensity, mean, and
/// population variance, per channel in channel order.
pub fn patch_features(patch: &Patch) -> Vec<f64> {
    let block = patch.edge * patch.edge * patch.edge;
    let center = block / 2;
    let mut features = Vec::with_capacity(3 * patch.n_channels);
    for c in 0..patch.n_channels {
        let values = patch.channel_values(c);
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / block as f64;
        let variance = values
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / block as f64;
        features.push(values[center] as f64);
        features.push(mean);
        features.push(variance);
    }
    features
}

/// A trained exact-kNN model: every standardized training vector plus
/// the standardization parameters needed to map queries into the same
/// space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    edge: usize,
    n_channels: usize,
    /// Indices (into the raw feature vector) of features with nonzero
    /// spread; zero-variance features carry no signal and are dropped.
    retained: Vec<usize>,
    /// Training mean per retained feature.
    means: Vec<f64>,
    /// Training sample standard deviation per retained feature.
    sds: Vec<f64>,
    /// Standardized training vectors, flattened row-major
    /// (`n_training × retained.len()`).
    features: Vec<f64>,
    /// True for lesion-labeled training patches.
    labels: Vec<bool>,
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_training(&self) -> usize {
        self.labels.len()
    }

    /// Raw-feature indices that survived the zero-variance drop.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// Structural consistency of a deserialized model.
    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        let d = self.retained.len();
        let ok = self.k >= 1
            && self.k <= n
            && self.edge % 2 == 1
            && self.n_channels >= 1
            && self.means.len() == d
            && self.sds.len() == d
            && self.features.len() == n * d
            && self.retained.iter().all(|&i| i < 3 * self.n_channels)
            && self.sds.iter().all(|&s| s.is_finite() && s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::CorruptFile(
                "knn model fields are inconsistent".to_string(),
            ))
        }
    }

    fn standardize_query(&self, raw: &[f64]) -> Vec<f64> {
        self.retained
            .iter()
            .enumerate()
            .map(|(j, &i)| (raw[i] - self.means[j]) / self.sds[j])
            .collect()
    }
}

/// Trains an exact kNN model on labeled patches.
///
/// Features are standardized to training mean 0 and sample standard
/// deviation 1; features constant across the training set are dropped
/// (their indices are recorded on the model). Insertion order is part of
/// the model: it breaks distance ties at prediction time.
///
/// # Errors
///
/// `invariant-violation` when `k` is zero or a patch is unlabeled;
/// `feature-mismatch` when patches disagree on layout; `k-too-large`
/// when `k` exceeds the training count; `degenerate-labels` when only
/// one class is present.
pub fn knn_train(patches: &[Patch], k: usize) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::InvariantViolation(
            "neighbor count k must be positive".to_string(),
        ));
    }
    let n = patches.len();
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let edge = patches[0].edge;
    let n_channels = patches[0].n_channels;
    let block = edge * edge * edge;

    let mut labels = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n * 3 * n_channels);
    for patch in patches {
        if patch.edge != edge
            || patch.n_channels != n_channels
            || patch.values.len() != block * n_channels
        {
            return Err(Error::FeatureMismatch(format!(
                "expected edge {edge} with {n_channels} channels, got edge {} with {} channels \
                 and {} values",
                patch.edge,
                patch.n_channels,
                patch.values.len()
            )));
        }
        match patch.label {
            Some(label) => labels.push(label == crate::pipeline::PatchLabel::Lesion),
            None => {
                return Err(Error::InvariantViolation(
                    "knn training requires labeled patches".to_string(),
                ))
            }
        }
        raw.extend(patch_features(patch));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::DegenerateLabels);
    }

    let d_raw = 3 * n_channels;
    let mut retained = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for i in 0..d_raw {
        let mean = (0..n).map(|r| raw[r * d_raw + i]).sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss = (0..n)
                .map(|r| {
                    let d = raw[r * d_raw + i] - mean;
                    d * d
                })
                .sum::<f64>();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        if sd.is_finite() && sd > 0.0 {
            retained.push(i);
            means.push(mean);
            sds.push(sd);
        }
    }

    let d = retained.len();
    let mut features = Vec::with_capacity(n * d);
    for r in 0..n {
        for (j, &i) in retained.iter().enumerate() {
            features.push((raw[r * d_raw + i] - means[j]) / sds[j]);
        }
    }

    Ok(KnnModel {
        k,
        edge,
        n_channels,
        retained,
        means,
        sds,
        features,
        labels,
    })
}

/// Lesion probability for one patch: the lesion fraction among the k
/// nearest standardized training vectors. Always a multiple of 1/k.
///
/// # Errors
///
/// `feature-mismatch` when the patch layout differs from training.
pub fn knn_predict(model: &KnnModel, patch: &Patch) -> Result<f64> {
    let block = model.edge * model.edge * model.edge;
    if patch.edge != model.edge
        || patch.n_channels != model.n_channels
        || patch.values.len() != block * model.n_channels
    {
        return Err(Error::FeatureMismatch(format!(
            "model expects edge {} with {} channels, got edge {} with {} channels and {} values",
            model.edge,
            model.n_channels,
            patch.edge,
            patch.n_channels,
            patch.values.len()
        )));
    }
    let query = model.standardize_query(&patch_features(patch));
    let d = model.retained.len();
    let n = model.labels.len();

    // (squared distance, insertion index): the index makes the order
    // total, which is exactly the tie rule.
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|r| {
            let row = &model.features[r * d..(r + 1) * d];
            let dist2 = row
                .iter()
                .zip(&query)
                .map(|(a, b)| {
                    let diff = a - b;
                    diff * diff
                })
                .sum::<f64>();
            (dist2, r)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if model.k < n {
        order.select_nth_unstable_by(model.k - 1, cmp);
    }
    let votes = order[..model.k]
        .iter()
        .filter(|&&(_, r)| model.labels[r])
        .count();
    Ok(votes as f64 / model.k as f64)
}

impl Classifier for KnnModel {
    fn kind(&self) -> &'static str {
        "knn"
    }

    fn predict(&self, patch: &Patch) -> Result<f64> {
        knn_predict(self, patch)
    }

    fn save_payload(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::InvariantViolation(e.to_string()))
    }
}

/// A cascade-ready factory training a kNN stage with the given k.
pub fn knn_factory(k: usize) -> Box<ClassifierFactory> {
    Box::new(move |pool: &[Patch]| Ok(Box::new(knn_train(pool, k)?) as Box<dyn Classifier>))
}
