//! Crate-wide error type.
//!
//! Every failure mode carries a stable kebab-case name, returned by
//! [`Error::code`] and used as the prefix of the `Display` form. CLI
//! diagnostics and tests match on these names rather than on message
//! wording, so the names are part of the public contract; the free-text
//! detail after the colon is not.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A volume file declares a scalar type outside {uint8, int16, float32}.
    #[error("unsupported-dtype: {0}")]
    UnsupportedDtype(String),

    /// A volume file is structurally broken (truncated payload, garbled
    /// header line, bad archive layout).
    #[error("corrupt-file: {0}")]
    CorruptFile(String),

    /// A volume header parses but carries invalid field values.
    #[error("invalid-header: {0}")]
    InvalidHeader(String),

    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),

    /// A binarization threshold outside [0, 1].
    #[error("invalid-threshold: threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    /// A domain-type invariant would be violated (mask voxel not in {0, 1},
    /// probability outside [0, 1], zero-length dimension, ...).
    #[error("invariant-violation: {0}")]
    InvariantViolation(String),

    /// Two volumes that must share a grid have different dims or spacing.
    #[error("grid-mismatch: {0}")]
    GridMismatch(String),

    /// Negative minimum-lesion-size filter.
    #[error("invalid-size: minimum lesion size must be non-negative and finite, got {0}")]
    InvalidSize(f64),

    /// An unusable threshold grid (empty, non-increasing, or out of range).
    #[error("invalid-grid: {0}")]
    InvalidGrid(String),

    /// Not enough observations for the requested statistic.
    #[error("insufficient-data: {0}")]
    InsufficientData(String),

    /// Unknown cohort grouping key.
    #[error("invalid-key: unknown group key `{0}` (expected none, tlv, or scanner)")]
    InvalidKey(String),

    /// Histogram matching cannot build a monotone remap from a
    /// constant-intensity source.
    #[error("degenerate-histogram: source foreground is constant; no monotone remap exists")]
    DegenerateHistogram,

    /// An operation that needs foreground voxels was given a volume with
    /// none.
    #[error("empty-volume: volume has no nonzero voxels")]
    EmptyVolume,

    /// Class balancing was handed a training set without a single positive
    /// patch.
    #[error("no-positive-samples: labeled patches contain no positive class")]
    NoPositiveSamples,

    /// Stage 1 of the cascade classified no training voxel as positive, so
    /// stage 2 has nothing to train on.
    #[error("stage1-degenerate: stage 1 classified no training voxel as positive")]
    Stage1Degenerate,

    /// The channels handed to the cascade do not match the channels it was
    /// trained with.
    #[error("channel-mismatch: {0}")]
    ChannelMismatch(String),

    /// A query patch does not match the feature layout the classifier was
    /// trained on.
    #[error("feature-mismatch: {0}")]
    FeatureMismatch(String),

    /// k exceeds the number of training points.
    #[error("k-too-large: k = {k} exceeds training-set size {n}")]
    KTooLarge { k: usize, n: usize },

    /// Supervised training requires both classes to be present.
    #[error("degenerate-labels: training patches contain a single class")]
    DegenerateLabels,

    /// A perturbation referenced a lesion id absent from the manifest.
    #[error("invalid-lesion-id: no lesion with id {0}")]
    InvalidLesionId(u32),

    /// Phantom placement could not fit the requested shapes within the
    /// rejection-sampling budget.
    #[error(
        "placement-overflow: gave up after {attempts} attempts with {placed} of {requested} shapes placed"
    )]
    PlacementOverflow {
        attempts: usize,
        placed: usize,
        requested: usize,
    },
}

impl Error {
    /// The stable machine-readable name of this failure mode.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnsupportedDtype(_) => "unsupported-dtype",
            Error::CorruptFile(_) => "corrupt-file",
            Error::InvalidHeader(_) => "invalid-header",
            Error::Io(_) => "io-error",
            Error::InvalidThreshold(_) => "invalid-threshold",
            Error::InvariantViolation(_) => "invariant-violation",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::InvalidSize(_) => "invalid-size",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InvalidKey(_) => "invalid-key",
            Error::DegenerateHistogram => "degenerate-histogram",
            Error::EmptyVolume => "empty-volume",
            Error::NoPositiveSamples => "no-positive-samples",
            Error::Stage1Degenerate => "stage1-degenerate",
            Error::ChannelMismatch(_) => "channel-mismatch",
            Error::FeatureMismatch(_) => "feature-mismatch",
            Error::KTooLarge { .. } => "k-too-large",
            Error::DegenerateLabels => "degenerate-labels",
            Error::InvalidLesionId(_) => "invalid-lesion-id",
            Error::PlacementOverflow { .. } => "placement-overflow",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_starts_with_code() {
        let cases: Vec<Error> = vec![
            Error::UnsupportedDtype("datatype code 64".into()),
            Error::CorruptFile("truncated".into()),
            Error::InvalidHeader("bad magic".into()),
            Error::InvalidThreshold(1.5),
            Error::InvariantViolation("x".into()),
            Error::GridMismatch("x".into()),
            Error::InvalidSize(-1.0),
            Error::InvalidGrid("empty".into()),
            Error::InsufficientData("x".into()),
            Error::InvalidKey("bogus".into()),
            Error::DegenerateHistogram,
            Error::EmptyVolume,
            Error::NoPositiveSamples,
            Error::Stage1Degenerate,
            Error::ChannelMismatch("x".into()),
            Error::FeatureMismatch("x".into()),
            Error::KTooLarge { k: 9, n: 3 },
            Error::DegenerateLabels,
            Error::InvalidLesionId(7),
            Error::PlacementOverflow {
                attempts: 10_000,
                placed: 3,
                requested: 20,
            },
        ];
        for e in cases {
            assert!(
                e.to_string().starts_with(e.code()),
                "display `{e}` does not start with code `{}`",
                e.code()
            );
        }
    }
}
