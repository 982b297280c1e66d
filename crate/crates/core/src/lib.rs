//! Volumetric lesion-segmentation evaluation and a reference
//! segmentation pipeline, built for exact, reproducible numbers.
//!
//! The evaluation half reads binary masks on a voxel grid, decomposes
//! them into connected components, and reports overlap and detection
//! metrics (dice, true-positive rate, lesion-wise TPR/FPR, volume
//! difference), with cohort aggregation, ROC-style threshold sweeps,
//! Wilcoxon signed-rank comparisons, and Bland–Altman volume agreement
//! on top. Metrics whose denominator vanishes are reported as undefined
//! rather than imputed.
//!
//! The pipeline half is a two-stage patch classifier cascade: histogram
//! normalization, intensity-based candidate selection, class-balanced
//! patch sampling, a pluggable classifier per stage (a kNN reference
//! implementation ships in [`classifier`]), and threshold tuning on
//! validation cases. A seeded phantom generator supplies synthetic
//! cohorts whose exact metric outcomes are known by construction, which
//! is how most of this crate is tested.
//!
//! Determinism is load-bearing throughout: fixed generator algorithms,
//! explicit seeds, and stable orderings make equal inputs produce
//! byte-identical outputs regardless of thread count.

pub mod classifier;
pub mod conncomp;
pub mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod stats;
pub mod volume;

pub use conncomp::Connectivity;
pub use error::{Error, Result};
pub use metrics::{evaluate_pair, total_lesion_volume_ml, MetricsReport};
pub use volume::{BinaryMask, Dtype, ProbabilityMap, Volume};
