//! Histogram matching: a monotone remap of foreground intensities so the
//! source's empirical distribution matches a reference's.
//!
//! Both distributions are summarized by 256 evenly spaced quantiles. A
//! source value is located on the source quantile curve (its empirical
//! CDF position) and replaced by the reference curve's value at the same
//! position, with linear interpolation between quantiles. Background —
//! exactly-zero voxels, the convention for "outside the head" — is left
//! untouched, and outputs are clamped to the reference foreground range
//! by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Number of quantile knots summarizing each distribution.
pub const HISTOGRAM_KNOTS: usize = 256;

/// A reference intensity distribution: its foreground quantile curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReference {
    knots: Vec<f32>,
}

impl HistogramReference {
    /// Summarizes one volume's foreground.
    ///
    /// # Errors
    ///
    /// `empty-volume` without foreground voxels; `invariant-violation` on
    /// non-finite intensities.
    pub fn from_volume(v: &Volume) -> Result<Self> {
        Self::from_volumes(&[v])
    }

    /// Summarizes the pooled foreground of several volumes — the way a
    /// per-channel reference is built from a whole training cohort.
    pub fn from_volumes(volumes: &[&Volume]) -> Result<Self> {
        let mut foreground = Vec::new();
        for v in volumes {
            collect_foreground(v, &mut foreground)?;
        }
        if foreground.is_empty() {
            return Err(Error::EmptyVolume);
        }
        foreground.sort_by(|a, b| a.partial_cmp(b).expect("checked finite"));
        let knots = (0..HISTOGRAM_KNOTS)
            .map(|i| {
                let q = i as f64 / (HISTOGRAM_KNOTS - 1) as f64;
                quantile(&foreground, q) as f32
            })
            .collect();
        Ok(HistogramReference { knots })
    }

    pub fn knots(&self) -> &[f32] {
        &self.knots
    }
}

fn collect_foreground(v: &Volume, out: &mut Vec<f32>) -> Result<()> {
    for i in 0..v.len() {
        let value = v.value(i);
        if !value.is_finite() {
            return Err(Error::InvariantViolation(
                "histogram matching requires finite intensities".to_string(),
            ));
        }
        if value != 0.0 {
            out.push(value as f32);
        }
    }
    Ok(())
}

/// Linear-interpolation quantile of a sorted nonempty slice.
fn quantile(sorted: &[f32], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let t = pos - lo as f64;
    // The equality early-outs keep values sitting on mass points exact
    // instead of within an ulp, which self-matching tests rely on.
    if t == 0.0 || lo + 1 == sorted.len() || sorted[lo] == sorted[lo + 1] {
        sorted[lo] as f64
    } else {
        sorted[lo] as f64 * (1.0 - t) + sorted[lo + 1] as f64 * t
    }
}

/// Remaps `src` so its foreground distribution matches `reference`'s.
/// Convenience wrapper over [`histogram_match_to`].
pub fn histogram_match(src: &Volume, reference: &Volume) -> Result<Volume> {
    histogram_match_to(src, &HistogramReference::from_volume(reference)?)
}

/// Remaps `src` against a prebuilt reference. The output is always
/// float32 on the source grid; zero voxels stay exactly zero.
///
/// # Errors
///
/// `empty-volume` when `src` has no foreground; `degenerate-histogram`
/// when its foreground is constant (no monotone remap exists).
pub fn histogram_match_to(src: &Volume, reference: &HistogramReference) -> Result<Volume> {
    let mut src_foreground = Vec::new();
    collect_foreground(src, &mut src_foreground)?;
    if src_foreground.is_empty() {
        return Err(Error::EmptyVolume);
    }
    src_foreground.sort_by(|a, b| a.partial_cmp(b).expect("checked finite"));
    if src_foreground[0] == *src_foreground.last().unwrap() {
        return Err(Error::DegenerateHistogram);
    }
    let src_knots: Vec<f32> = (0..HISTOGRAM_KNOTS)
        .map(|i| {
            let q = i as f64 / (HISTOGRAM_KNOTS - 1) as f64;
            quantile(&src_foreground, q) as f32
        })
        .collect();

    let data: Vec<f32> = (0..src.len())
        .map(|i| {
            let v = src.value(i) as f32;
            if v == 0.0 {
                0.0
            } else {
                remap(v, &src_knots, reference.knots()) as f32
            }
        })
        .collect();
    Volume::from_f32(src.dims(), src.spacing(), data)
}

/// Maps one value through the quantile curves: locate `v`'s fractional
/// knot position on the source curve, then read the reference curve
/// there.
fn remap(v: f32, src_knots: &[f32], ref_knots: &[f32]) -> f64 {
    let last = src_knots.len() - 1;
    let v = v.clamp(src_knots[0], src_knots[last]);
    // Knot runs can repeat a value when the distribution has mass points;
    // landing in the middle of the run keeps self-matching exact.
    let first_ge = src_knots.partition_point(|k| *k < v);
    let first_gt = src_knots.partition_point(|k| *k <= v);
    let u = if first_gt > first_ge {
        (first_ge + first_gt - 1) as f64 / 2.0
    } else {
        // Strictly between knots first_ge-1 and first_ge; first_ge ≥ 1
        // because v is clamped into the knot range.
        let j = first_ge - 1;
        let k0 = src_knots[j] as f64;
        let k1 = src_knots[j + 1] as f64;
        j as f64 + (v as f64 - k0) / (k1 - k0)
    };
    interpolate(ref_knots, u)
}

fn interpolate(knots: &[f32], pos: f64) -> f64 {
    let lo = pos.floor() as usize;
    if lo + 1 >= knots.len() {
        return knots[knots.len() - 1] as f64;
    }
    if knots[lo] == knots[lo + 1] {
        return knots[lo] as f64;
    }
    let t = pos - lo as f64;
    knots[lo] as f64 * (1.0 - t) + knots[lo + 1] as f64 * t
}
