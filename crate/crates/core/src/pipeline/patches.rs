//! Patch geometry and sampling: cubic multi-channel patches around
//! candidate voxels, and the negative-undersampling step that balances
//! training classes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::PRIOR_CHANNEL;
use crate::volume::{BinaryMask, Volume};

/// Customary patch edge for full-size clinical volumes.
pub const DEFAULT_PATCH_EDGE: usize = 11;

/// The patch layout: cube edge plus the ordered input channel names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPatchSpec")]
pub struct PatchSpec {
    edge: usize,
    channels: Vec<String>,
}

#[derive(Deserialize)]
struct RawPatchSpec {
    edge: usize,
    channels: Vec<String>,
}

impl TryFrom<RawPatchSpec> for PatchSpec {
    type Error = Error;

    fn try_from(raw: RawPatchSpec) -> Result<Self> {
        PatchSpec::new(raw.edge, raw.channels)
    }
}

impl PatchSpec {
    /// # Errors
    ///
    /// `invariant-violation` unless `edge` is odd and positive and at
    /// least one channel is named.
    pub fn new(edge: usize, channels: Vec<String>) -> Result<Self> {
        if edge == 0 || edge.is_multiple_of(2) {
            return Err(Error::InvariantViolation(format!(
                "patch edge must be odd and positive, got {edge}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvariantViolation(
                "patch spec needs at least one channel".to_string(),
            ));
        }
        Ok(PatchSpec { edge, channels })
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Total scalars per patch: edge³ per channel.
    pub fn values_len(&self) -> usize {
        self.edge * self.edge * self.edge * self.channels.len()
    }

    /// The same layout with a PRIOR channel appended (idempotent).
    pub fn with_prior(&self) -> PatchSpec {
        if self.has_prior() {
            return self.clone();
        }
        let mut channels = self.channels.clone();
        channels.push(PRIOR_CHANNEL.to_string());
        PatchSpec {
            edge: self.edge,
            channels,
        }
    }

    pub fn has_prior(&self) -> bool {
        self.channels.iter().any(|c| c == PRIOR_CHANNEL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchLabel {
    Lesion,
    Background,
}

/// One extracted patch: values are channel-major, and within a channel
/// run z-then-y-then-x with x fastest — the volume's own scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: (u32, u32, u32),
    pub edge: usize,
    pub n_channels: usize,
    pub values: Vec<f32>,
    pub label: Option<PatchLabel>,
    /// True when part of the cube fell outside the volume and was
    /// zero-filled.
    pub padded: bool,
}

impl Patch {
    /// One channel's edge³ block.
    pub fn channel_values(&self, channel: usize) -> &[f32] {
        let block = self.edge * self.edge * self.edge;
        &self.values[channel * block..(channel + 1) * block]
    }
}

/// Fills `out` with one patch's values from prepared per-channel slices.
/// Returns true when zero-padding was needed. Callers guarantee the
/// center is in bounds.
pub(crate) fn patch_values_into(
    channel_data: &[Vec<f32>],
    dims: (usize, usize, usize),
    edge: usize,
    center: (u32, u32, u32),
    out: &mut Vec<f32>,
) -> bool {
    let (nx, ny, nz) = dims;
    let half = (edge / 2) as i64;
    let (cx, cy, cz) = (center.0 as i64, center.1 as i64, center.2 as i64);
    let mut padded = false;
    out.clear();
    for data in channel_data {
        for dz in -half..=half {
            for dy in -half..=half {
                for dx in -half..=half {
                    let (x, y, z) = (cx + dx, cy + dy, cz + dz);
                    if x >= 0 && y >= 0 && z >= 0
                        && (x as usize) < nx && (y as usize) < ny && (z as usize) < nz
                    {
                        out.push(data[x as usize + nx * (y as usize + ny * z as usize)]);
                    } else {
                        out.push(0.0);
                        padded = true;
                    }
                }
            }
        }
    }
    padded
}

/// Extracts one patch per center, in the given center order.
///
/// # Errors
///
/// `channel-mismatch` when the channel count differs from the spec;
/// `grid-mismatch` when channels (or the label mask) disagree on the
/// grid; `invariant-violation` on an out-of-bounds center.
pub fn extract_patches(
    channels: &[Volume],
    spec: &PatchSpec,
    centers: &[(u32, u32, u32)],
    labels: Option<&BinaryMask>,
) -> Result<Vec<Patch>> {
    if channels.len() != spec.n_channels() {
        return Err(Error::ChannelMismatch(format!(
            "spec names {} channels ({}), got {}",
            spec.n_channels(),
            spec.channels().join(", "),
            channels.len()
        )));
    }
    let first = &channels[0];
    for other in &channels[1..] {
        if !first.same_grid(other) {
            return Err(Error::GridMismatch(first.grid_diff(other)));
        }
    }
    if let Some(mask) = labels {
        if !first.same_grid(mask.volume()) {
            return Err(Error::GridMismatch(first.grid_diff(mask.volume())));
        }
    }

    let dims = first.dims();
    let channel_data: Vec<Vec<f32>> = channels.iter().map(Volume::to_f32_vec).collect();
    let mut patches = Vec::with_capacity(centers.len());
    for &center in centers {
        if !first.in_bounds(center.0 as i64, center.1 as i64, center.2 as i64) {
            return Err(Error::InvariantViolation(format!(
                "patch center {center:?} is out of bounds for {}x{}x{}",
                dims.0, dims.1, dims.2
            )));
        }
        let mut values = Vec::with_capacity(spec.values_len());
        let padded = patch_values_into(&channel_data, dims, spec.edge(), center, &mut values);
        let label = labels.map(|mask| {
            let i = center.0 as usize + dims.0 * (center.1 as usize + dims.1 * center.2 as usize);
            if mask.get(i) {
                PatchLabel::Lesion
            } else {
                PatchLabel::Background
            }
        });
        patches.push(Patch {
            center,
            edge: spec.edge(),
            n_channels: spec.n_channels(),
            values,
            label,
            padded,
        });
    }
    Ok(patches)
}

/// Undersamples the background class down to the lesion count: every
/// positive patch is kept, and negatives are drawn without replacement
/// with the seeded generator. Relative input order is preserved, so a
/// run with equal class counts is the identity.
///
/// # Errors
///
/// `no-positive-samples` without lesion patches; `invariant-violation`
/// if any patch is unlabeled.
pub fn balance_classes(patches: Vec<Patch>, seed: u64) -> Result<Vec<Patch>> {
    let mut positives = 0usize;
    let mut negatives = 0usize;
    for p in &patches {
        match p.label {
            Some(PatchLabel::Lesion) => positives += 1,
            Some(PatchLabel::Background) => negatives += 1,
            None => {
                return Err(Error::InvariantViolation(
                    "class balancing requires labeled patches".to_string(),
                ))
            }
        }
    }
    if positives == 0 {
        return Err(Error::NoPositiveSamples);
    }
    if negatives <= positives {
        return Ok(patches);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, negatives, positives).into_vec();
    picked.sort_unstable();

    let mut kept = Vec::with_capacity(2 * positives);
    let mut negative_ordinal = 0usize;
    let mut next_pick = picked.iter().peekable();
    for patch in patches {
        match patch.label {
            Some(PatchLabel::Lesion) => kept.push(patch),
            Some(PatchLabel::Background) => {
                if next_pick.peek() == Some(&&negative_ordinal) {
                    next_pick.next();
                    kept.push(patch);
                }
                negative_ordinal += 1;
            }
            None => unreachable!("checked above"),
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(edge: usize, names: &[&str]) -> PatchSpec {
        PatchSpec::new(edge, names.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn cube(n: usize, value: f32) -> Volume {
        Volume::from_f32((n, n, n), (1.0, 1.0, 1.0), vec![value; n * n * n]).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert_eq!(
            PatchSpec::new(4, vec!["FLAIR".into()]).unwrap_err().code(),
            "invariant-violation"
        );
        assert_eq!(PatchSpec::new(5, vec![]).unwrap_err().code(), "invariant-violation");
        let s = spec(11, &["FLAIR", "T1"]);
        assert_eq!(s.values_len(), 2 * 11 * 11 * 11);
    }

    #[test]
    fn prior_suffix_is_idempotent() {
        let s = spec(5, &["FLAIR"]);
        assert!(!s.has_prior());
        let with = s.with_prior();
        assert!(with.has_prior());
        assert_eq!(with.channels().last().map(String::as_str), Some("PRIOR"));
        assert_eq!(with.with_prior(), with);
    }

    #[test]
    fn spec_deserialization_validates() {
        let ok: PatchSpec = serde_json::from_str(r#"{"edge":5,"channels":["FLAIR"]}"#).unwrap();
        assert_eq!(ok.edge(), 5);
        assert!(serde_json::from_str::<PatchSpec>(r#"{"edge":4,"channels":["FLAIR"]}"#).is_err());
    }

    #[test]
    fn interior_patch_of_constant_volume() {
        let v = cube(5, 7.5);
        let patches = extract_patches(&[v], &spec(3, &["FLAIR"]), &[(2, 2, 2)], None).unwrap();
        assert_eq!(patches.len(), 1);
        assert!(!patches[0].padded);
        assert_eq!(patches[0].values, vec![7.5; 27]);
        assert_eq!(patches[0].label, None);
    }

    #[test]
    fn corner_patch_is_zero_padded() {
        let v = cube(5, 1.0);
        let patches = extract_patches(&[v], &spec(3, &["FLAIR"]), &[(0, 0, 0)], None).unwrap();
        let p = &patches[0];
        assert!(p.padded);
        assert_eq!(p.values.iter().filter(|&&x| x == 0.0).count(), 27 - 8);
        assert_eq!(p.values.iter().filter(|&&x| x == 1.0).count(), 8);
    }

    #[test]
    fn values_follow_scan_order() {
        // Channel data = linear index; a centered 3³ patch over the whole
        // 3×3×3 volume must reproduce 0..27 in order.
        let data: Vec<f32> = (0..27).map(|i| i as f32).collect();
        let v = Volume::from_f32((3, 3, 3), (1.0, 1.0, 1.0), data.clone()).unwrap();
        let patches = extract_patches(&[v], &spec(3, &["FLAIR"]), &[(1, 1, 1)], None).unwrap();
        assert_eq!(patches[0].values, data);
    }

    #[test]
    fn two_channels_concatenate_in_channel_order() {
        let a = cube(5, 1.0);
        let b = cube(5, 2.0);
        let patches =
            extract_patches(&[a, b], &spec(3, &["FLAIR", "T1"]), &[(2, 2, 2)], None).unwrap();
        let p = &patches[0];
        assert_eq!(p.values.len(), 2 * 27);
        assert_eq!(p.channel_values(0), &[1.0; 27]);
        assert_eq!(p.channel_values(1), &[2.0; 27]);
    }

    #[test]
    fn labels_come_from_the_center_voxel() {
        let v = cube(3, 1.0);
        let mut bools = vec![false; 27];
        bools[1 + 3 * (1 + 3)] = true; // (1,1,1)
        let gt = BinaryMask::from_bools((3, 3, 3), (1.0, 1.0, 1.0), &bools).unwrap();
        let patches = extract_patches(
            &[v],
            &spec(1, &["FLAIR"]),
            &[(1, 1, 1), (0, 0, 0)],
            Some(&gt),
        )
        .unwrap();
        assert_eq!(patches[0].label, Some(PatchLabel::Lesion));
        assert_eq!(patches[1].label, Some(PatchLabel::Background));
    }

    #[test]
    fn extraction_errors() {
        let v = cube(3, 1.0);
        let err = extract_patches(std::slice::from_ref(&v), &spec(3, &["FLAIR", "T1"]), &[], None)
            .unwrap_err();
        assert_eq!(err.code(), "channel-mismatch");

        let other = cube(4, 1.0);
        let err = extract_patches(&[v.clone(), other], &spec(3, &["FLAIR", "T1"]), &[], None)
            .unwrap_err();
        assert_eq!(err.code(), "grid-mismatch");

        let err =
            extract_patches(&[v], &spec(3, &["FLAIR"]), &[(3, 0, 0)], None).unwrap_err();
        assert_eq!(err.code(), "invariant-violation");
    }

    fn labeled(label: PatchLabel, tag: f32) -> Patch {
        Patch {
            center: (0, 0, 0),
            edge: 1,
            n_channels: 1,
            values: vec![tag],
            label: Some(label),
            padded: false,
        }
    }

    #[test]
    fn balancing_undersamples_negatives() {
        let mut patches: Vec<Patch> =
            (0..10).map(|i| labeled(PatchLabel::Lesion, i as f32)).collect();
        patches.extend((0..100).map(|i| labeled(PatchLabel::Background, 100.0 + i as f32)));
        let balanced = balance_classes(patches, 7).unwrap();
        assert_eq!(balanced.len(), 20);
        let positives = balanced
            .iter()
            .filter(|p| p.label == Some(PatchLabel::Lesion))
            .count();
        assert_eq!(positives, 10);
    }

    #[test]
    fn balancing_is_deterministic_per_seed() {
        let make = || {
            let mut patches: Vec<Patch> =
                (0..5).map(|i| labeled(PatchLabel::Lesion, i as f32)).collect();
            patches.extend((0..50).map(|i| labeled(PatchLabel::Background, 100.0 + i as f32)));
            patches
        };
        let a = balance_classes(make(), 3).unwrap();
        let b = balance_classes(make(), 3).unwrap();
        assert_eq!(a, b);
        let c = balance_classes(make(), 4).unwrap();
        assert_eq!(c.len(), a.len());
    }

    #[test]
    fn equal_classes_pass_through_unchanged() {
        let patches = vec![
            labeled(PatchLabel::Background, 0.0),
            labeled(PatchLabel::Lesion, 1.0),
            labeled(PatchLabel::Background, 2.0),
            labeled(PatchLabel::Lesion, 3.0),
        ];
        let balanced = balance_classes(patches.clone(), 9).unwrap();
        assert_eq!(balanced, patches);
    }

    #[test]
    fn balancing_preserves_relative_order() {
        let mut patches: Vec<Patch> =
            (0..3).map(|i| labeled(PatchLabel::Lesion, i as f32)).collect();
        patches.extend((0..30).map(|i| labeled(PatchLabel::Background, 100.0 + i as f32)));
        let balanced = balance_classes(patches, 11).unwrap();
        let tags: Vec<f32> = balanced.iter().map(|p| p.values[0]).collect();
        let mut sorted_negs: Vec<f32> =
            tags.iter().copied().filter(|t| *t >= 100.0).collect();
        sorted_negs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let negs: Vec<f32> = tags.iter().copied().filter(|t| *t >= 100.0).collect();
        assert_eq!(negs, sorted_negs);
    }

    #[test]
    fn balancing_errors() {
        let only_negative = vec![labeled(PatchLabel::Background, 0.0)];
        assert_eq!(
            balance_classes(only_negative, 0).unwrap_err().code(),
            "no-positive-samples"
        );
        let unlabeled = vec![Patch {
            label: None,
            ..labeled(PatchLabel::Lesion, 0.0)
        }];
        assert_eq!(
            balance_classes(unlabeled, 0).unwrap_err().code(),
            "invariant-violation"
        );
    }
}
