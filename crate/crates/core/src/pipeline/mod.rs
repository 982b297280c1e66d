//! Segmentation-pipeline mechanics: intensity normalization, candidate
//! voxel selection, patch extraction and class balancing, and the
//! two-stage cascade that ties them together around pluggable
//! classifiers.
//!
//! The cascade's shape: cheap intensity thresholding proposes candidate
//! voxels, stage 1 classifies every candidate, and stage 2 — trained only
//! on voxels stage 1 let through — re-scores the positives to strip false
//! detections. A probabilistic prior map can ride along as an extra input
//! channel.

mod cascade;
mod model;
mod normalize;
mod patches;

pub use cascade::{
    apply_cascade, apply_cascade_stages, train_cascade, train_cascade_with, CascadeCase,
    CascadeConfig, CascadeStages,
};
pub use model::{
    CascadeModel, Classifier, ClassifierFactory, ConstantClassifier, MODEL_FORMAT_VERSION,
};
pub use normalize::{histogram_match, histogram_match_to, HistogramReference, HISTOGRAM_KNOTS};
pub use patches::{
    balance_classes, extract_patches, Patch, PatchLabel, PatchSpec, DEFAULT_PATCH_EDGE,
};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, ProbabilityMap, Volume};

/// Reserved channel name for an injected prior probability map. The
/// channel is exempt from histogram matching — it is already a calibrated
/// probability, not a scanner intensity.
pub const PRIOR_CHANNEL: &str = "PRIOR";

/// Marks candidate voxels: those whose intensity exceeds `t_frac` times
/// the mean foreground (nonzero) intensity of `intensity`. Strict
/// comparison, so `t_frac = 1` on a constant image selects nothing.
///
/// # Errors
///
/// `invalid-threshold` on a negative or non-finite `t_frac`;
/// `empty-volume` when the volume has no nonzero voxel.
pub fn select_candidates(intensity: &Volume, t_frac: f64) -> Result<BinaryMask> {
    let flags = candidate_flags(&intensity.to_f32_vec(), t_frac)?;
    Ok(BinaryMask::from_bools(intensity.dims(), intensity.spacing(), &flags)
        .expect("flags built for this grid"))
}

/// The slice-level worker behind [`select_candidates`]; the cascade calls
/// it on already-normalized channel data to avoid rebuilding volumes.
pub(crate) fn candidate_flags(values: &[f32], t_frac: f64) -> Result<Vec<bool>> {
    if !(t_frac.is_finite() && t_frac >= 0.0) {
        return Err(Error::InvalidThreshold(t_frac));
    }
    let mut sum = 0.0f64;
    let mut n = 0u64;
    for &v in values {
        if v != 0.0 {
            sum += v as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyVolume);
    }
    let cut = t_frac * (sum / n as f64);
    Ok(values.iter().map(|&v| (v as f64) > cut).collect())
}

/// Appends a prior probability map to an input channel list. Pair with
/// [`PatchSpec::with_prior`] so patch layouts stay in sync.
///
/// # Errors
///
/// `invariant-violation` on an empty channel list; `grid-mismatch` when
/// the prior's grid differs from the channels'.
pub fn inject_prior(mut channels: Vec<Volume>, prior: &ProbabilityMap) -> Result<Vec<Volume>> {
    let Some(first) = channels.first() else {
        return Err(Error::InvariantViolation(
            "cannot inject a prior into an empty channel list".to_string(),
        ));
    };
    if !first.same_grid(prior.volume()) {
        return Err(Error::GridMismatch(first.grid_diff(prior.volume())));
    }
    channels.push(prior.volume().clone());
    Ok(channels)
}
