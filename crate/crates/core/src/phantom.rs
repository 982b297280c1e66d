//! Seeded synthetic cases with known-by-construction answers.
//!
//! A phantom is a volume of Gaussian background holding ellipsoidal
//! lesions (and optionally decoy blobs) whose exact voxel counts land in
//! a manifest. Because placement keeps every structure a separate
//! connected component, the metric outcome of any scripted perturbation
//! — dropping a lesion, adding a blob, eroding — can be computed from
//! the manifest alone and compared against the evaluation pipeline
//! exactly.
//!
//! Generation is deterministic: a fixed generator (ChaCha8) is seeded
//! from the spec and each case uses its own counter-indexed stream, so
//! cohorts can be produced in parallel, in any order, on any platform,
//! with identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conncomp::{label_components, Connectivity};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, PairCounts};
use crate::volume::{BinaryMask, Volume};

/// Rejection-sampling budget per case, over all placements.
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Gaussian intensity model of one channel, by region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensitySpec {
    pub background_mean: f64,
    pub background_sd: f64,
    pub lesion_mean: f64,
    pub lesion_sd: f64,
    /// Used only when the spec places blobs.
    pub blob_mean: f64,
    pub blob_sd: f64,
}

impl IntensitySpec {
    /// Same Gaussian everywhere except lesions: the blob intensity
    /// follows the background.
    pub fn uniform(background_mean: f64, background_sd: f64, lesion_mean: f64, lesion_sd: f64) -> Self {
        IntensitySpec {
            background_mean,
            background_sd,
            lesion_mean,
            lesion_sd,
            blob_mean: background_mean,
            blob_sd: background_sd,
        }
    }
}

/// One output channel: a name (used for file naming and patch specs)
/// plus its intensity model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub intensity: IntensitySpec,
}

/// Decoy structures that are not lesions: bright spots meant to fool an
/// intensity cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub count: usize,
    /// Sampled uniformly per blob.
    pub radius_mm: (f64, f64),
}

/// Everything needed to generate a case (or a cohort: combine with a
/// case index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: (usize, usize, usize),
    pub spacing: (f32, f32, f32),
    pub n_lesions: usize,
    /// Sampled uniformly per lesion.
    pub lesion_radius_mm: (f64, f64),
    /// Minimum center gap beyond the two radii, in voxel units. At least
    /// 2, which keeps every pair of structures out of each other's
    /// 26-neighborhood.
    pub min_separation_voxels: f64,
    pub channels: Vec<ChannelSpec>,
    pub blobs: Option<BlobSpec>,
    pub seed: u64,
}

/// The exact composition of one generated ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionRecord {
    /// Component id in scan order — the id `label_components` assigns.
    pub id: u32,
    pub center: (u32, u32, u32),
    pub radius_mm: f64,
    pub voxels: u64,
    pub volume_mm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRecord {
    pub center: (u32, u32, u32),
    pub radius_mm: f64,
    pub voxels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub case_index: u64,
    pub seed: u64,
    pub dims: (usize, usize, usize),
    pub spacing: (f32, f32, f32),
    pub channels: Vec<String>,
    pub lesions: Vec<LesionRecord>,
    pub blobs: Vec<BlobRecord>,
}

/// One generated case: intensity channels, ground truth, and the
/// manifest describing both.
#[derive(Debug, Clone)]
pub struct PhantomCase {
    pub case_index: u64,
    pub channels: Vec<Volume>,
    pub gt: BinaryMask,
    pub manifest: PhantomManifest,
}

/// Scripted edits to a perfect prediction, applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PerturbOp {
    /// Remove one lesion from the prediction entirely.
    DropLesion(u32),
    /// Add a false-positive ellipsoid. It must keep clear of every
    /// existing structure's 26-neighborhood.
    AddBlob {
        center: (u32, u32, u32),
        radius_mm: f64,
    },
    /// One 6-neighbor erosion step on one lesion.
    ErodeLesion(u32),
}

fn validate_spec(spec: &PhantomSpec) -> Result<()> {
    let (nx, ny, nz) = spec.dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvariantViolation(format!(
            "phantom dims must be positive, got {nx}x{ny}x{nz}"
        )));
    }
    let (sx, sy, sz) = spec.spacing;
    if !(sx > 0.0 && sy > 0.0 && sz > 0.0 && sx.is_finite() && sy.is_finite() && sz.is_finite()) {
        return Err(Error::InvariantViolation(format!(
            "phantom spacing must be positive and finite, got ({sx}, {sy}, {sz})"
        )));
    }
    let (lo, hi) = spec.lesion_radius_mm;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvariantViolation(format!(
            "lesion radius range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
        )));
    }
    if !(spec.min_separation_voxels >= 2.0 && spec.min_separation_voxels.is_finite()) {
        return Err(Error::InvariantViolation(format!(
            "separation must be at least 2 voxels to keep components distinct, got {}",
            spec.min_separation_voxels
        )));
    }
    if spec.channels.is_empty() {
        return Err(Error::InvariantViolation(
            "phantom needs at least one channel".to_string(),
        ));
    }
    for ch in &spec.channels {
        let i = &ch.intensity;
        for (what, mean, sd) in [
            ("background", i.background_mean, i.background_sd),
            ("lesion", i.lesion_mean, i.lesion_sd),
            ("blob", i.blob_mean, i.blob_sd),
        ] {
            if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
                return Err(Error::InvariantViolation(format!(
                    "channel {:?} {what} intensity must be finite with sd >= 0, got mean {mean} sd {sd}",
                    ch.name
                )));
            }
        }
    }
    if let Some(blobs) = &spec.blobs {
        let (lo, hi) = blobs.radius_mm;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "blob radius range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
    }
    Ok(())
}

/// Lattice points (center-of-voxel) inside the mm-radius ellipsoid
/// around an integer center. Returns None when any included voxel falls
/// outside the volume.
fn rasterize_ellipsoid(
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    center: (i64, i64, i64),
    radius_mm: f64,
) -> Option<Vec<(u32, u32, u32)>> {
    let (nx, ny, nz) = (dims.0 as i64, dims.1 as i64, dims.2 as i64);
    let (sx, sy, sz) = (spacing.0 as f64, spacing.1 as f64, spacing.2 as f64);
    let (cx, cy, cz) = center;
    let (rx, ry, rz) = (
        (radius_mm / sx).ceil() as i64,
        (radius_mm / sy).ceil() as i64,
        (radius_mm / sz).ceil() as i64,
    );
    let mut voxels = Vec::new();
    for dz in -rz..=rz {
        for dy in -ry..=ry {
            for dx in -rx..=rx {
                let q = (dx as f64 * sx / radius_mm).powi(2)
                    + (dy as f64 * sy / radius_mm).powi(2)
                    + (dz as f64 * sz / radius_mm).powi(2);
                if q <= 1.0 {
                    let (x, y, z) = (cx + dx, cy + dy, cz + dz);
                    if x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz {
                        return None;
                    }
                    voxels.push((x as u32, y as u32, z as u32));
                }
            }
        }
    }
    Some(voxels)
}

struct Placement {
    center: (i64, i64, i64),
    radius_mm: f64,
    voxels: Vec<(u32, u32, u32)>,
}

/// Centers must stay farther apart than the two radii (in voxel units,
/// conservatively scaled by the finest spacing) plus the configured gap.
fn far_enough(spec: &PhantomSpec, placed: &[Placement], center: (i64, i64, i64), radius_mm: f64) -> bool {
    let min_spacing = spec.spacing.0.min(spec.spacing.1).min(spec.spacing.2) as f64;
    for other in placed {
        let dx = (center.0 - other.center.0) as f64;
        let dy = (center.1 - other.center.1) as f64;
        let dz = (center.2 - other.center.2) as f64;
        let dist = (dx * dx + dy * dy + dz * dz).sqrt();
        let required =
            radius_mm / min_spacing + other.radius_mm / min_spacing + spec.min_separation_voxels;
        if dist < required {
            return false;
        }
    }
    true
}

/// Places `count` ellipsoids by rejection sampling, drawing radius and
/// center afresh on every attempt. The attempt budget is shared across
/// the whole case.
fn place_ellipsoids(
    spec: &PhantomSpec,
    rng: &mut ChaCha8Rng,
    placed: &mut Vec<Placement>,
    count: usize,
    radius_range: (f64, f64),
    attempts: &mut usize,
    requested_total: usize,
) -> Result<()> {
    let (nx, ny, nz) = (spec.dims.0 as i64, spec.dims.1 as i64, spec.dims.2 as i64);
    let (sx, sy, sz) = (spec.spacing.0 as f64, spec.spacing.1 as f64, spec.spacing.2 as f64);
    for _ in 0..count {
        loop {
            if *attempts >= MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementOverflow {
                    attempts: *attempts,
                    placed: placed.len(),
                    requested: requested_total,
                });
            }
            *attempts += 1;
            let radius_mm = rng.random_range(radius_range.0..=radius_range.1);
            // Keep one clear voxel beyond the ellipsoid so nothing
            // touches the volume boundary.
            let (mx, my, mz) = (
                (radius_mm / sx).ceil() as i64 + 1,
                (radius_mm / sy).ceil() as i64 + 1,
                (radius_mm / sz).ceil() as i64 + 1,
            );
            if mx > nx - 1 - mx || my > ny - 1 - my || mz > nz - 1 - mz {
                continue; // cannot fit at this radius
            }
            let center = (
                rng.random_range(mx..=nx - 1 - mx),
                rng.random_range(my..=ny - 1 - my),
                rng.random_range(mz..=nz - 1 - mz),
            );
            if !far_enough(spec, placed, center, radius_mm) {
                continue;
            }
            let voxels = rasterize_ellipsoid(spec.dims, spec.spacing, center, radius_mm)
                .expect("margins keep the ellipsoid inside the volume");
            placed.push(Placement {
                center,
                radius_mm,
                voxels,
            });
            break;
        }
    }
    Ok(())
}

/// Generates one case on the stream derived from (spec seed, case
/// index). Equal inputs give bit-identical output on every platform.
///
/// # Errors
///
/// `invariant-violation` on a malformed spec; `placement-overflow` when
/// rejection sampling cannot fit the requested structures.
pub fn generate_case(spec: &PhantomSpec, case_index: u64) -> Result<PhantomCase> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(case_index);

    let n = spec.dims.0 * spec.dims.1 * spec.dims.2;
    let requested = spec.n_lesions + spec.blobs.map_or(0, |b| b.count);
    let mut attempts = 0usize;

    let mut lesions = Vec::new();
    place_ellipsoids(
        spec,
        &mut rng,
        &mut lesions,
        spec.n_lesions,
        spec.lesion_radius_mm,
        &mut attempts,
        requested,
    )?;

    // Blobs join the same placement list so they keep their distance
    // from lesions and from each other.
    let mut all = lesions;
    let n_blobs = spec.blobs.map_or(0, |b| b.count);
    if let Some(blob_spec) = &spec.blobs {
        place_ellipsoids(
            spec,
            &mut rng,
            &mut all,
            blob_spec.count,
            blob_spec.radius_mm,
            &mut attempts,
            requested,
        )?;
    }
    let blob_placements = all.split_off(all.len() - n_blobs);
    let lesion_placements = all;

    // Region per voxel: 0 background, 1 lesion, 2 blob.
    let (nx, ny, _) = spec.dims;
    let linear = |v: (u32, u32, u32)| v.0 as usize + nx * (v.1 as usize + ny * v.2 as usize);
    let mut region = vec![0u8; n];
    for p in &lesion_placements {
        for &v in &p.voxels {
            region[linear(v)] = 1;
        }
    }
    for p in &blob_placements {
        for &v in &p.voxels {
            region[linear(v)] = 2;
        }
    }

    let gt_bools: Vec<bool> = region.iter().map(|&r| r == 1).collect();
    let gt = BinaryMask::from_bools(spec.dims, spec.spacing, &gt_bools)?;
    let voxel_volume = gt.volume().voxel_volume_mm3();

    // Channel intensities, voxels in scan order, channels in spec order.
    let mut channels = Vec::with_capacity(spec.channels.len());
    for ch in &spec.channels {
        let i = &ch.intensity;
        let dist = |mean: f64, sd: f64| {
            Normal::new(mean, sd).map_err(|e| {
                Error::InvariantViolation(format!("channel {:?}: {e}", ch.name))
            })
        };
        let by_region = [
            dist(i.background_mean, i.background_sd)?,
            dist(i.lesion_mean, i.lesion_sd)?,
            dist(i.blob_mean, i.blob_sd)?,
        ];
        let data: Vec<f32> = region
            .iter()
            .map(|&r| by_region[r as usize].sample(&mut rng) as f32)
            .collect();
        channels.push(Volume::from_f32(spec.dims, spec.spacing, data)?);
    }

    // Renumber lesion records to the component ids a scan-order labeling
    // assigns, so manifest ids and `label_components` ids agree.
    let labeled = label_components(&gt, Connectivity::TwentySix);
    if labeled.len() != lesion_placements.len() {
        return Err(Error::InvariantViolation(format!(
            "placed {} lesions but labeling found {} components",
            lesion_placements.len(),
            labeled.len()
        )));
    }
    let mut records = Vec::with_capacity(lesion_placements.len());
    for lesion in labeled.lesions.iter() {
        let member = |v: &(u32, u32, u32)| lesion.voxels.binary_search_by(|probe| {
            let key = |t: &(u32, u32, u32)| (t.2, t.1, t.0);
            key(probe).cmp(&key(v))
        });
        let placement = lesion_placements
            .iter()
            .find(|p| {
                let c = (p.center.0 as u32, p.center.1 as u32, p.center.2 as u32);
                member(&c).is_ok()
            })
            .ok_or_else(|| {
                Error::InvariantViolation("component contains no placed center".to_string())
            })?;
        if placement.voxels.len() != lesion.voxels.len() {
            return Err(Error::InvariantViolation(format!(
                "component {} has {} voxels, placement rasterized {}",
                lesion.id,
                lesion.voxels.len(),
                placement.voxels.len()
            )));
        }
        records.push(LesionRecord {
            id: lesion.id,
            center: (
                placement.center.0 as u32,
                placement.center.1 as u32,
                placement.center.2 as u32,
            ),
            radius_mm: placement.radius_mm,
            voxels: placement.voxels.len() as u64,
            volume_mm3: placement.voxels.len() as f64 * voxel_volume,
        });
    }

    let manifest = PhantomManifest {
        case_index,
        seed: spec.seed,
        dims: spec.dims,
        spacing: spec.spacing,
        channels: spec.channels.iter().map(|c| c.name.clone()).collect(),
        lesions: records,
        blobs: blob_placements
            .iter()
            .map(|p| BlobRecord {
                center: (p.center.0 as u32, p.center.1 as u32, p.center.2 as u32),
                radius_mm: p.radius_mm,
                voxels: p.voxels.len() as u64,
            })
            .collect(),
    };

    Ok(PhantomCase {
        case_index,
        channels,
        gt,
        manifest,
    })
}

/// Generates `n_cases` cases in parallel. Output order and content are
/// independent of thread count because every case has its own stream.
pub fn generate_cohort(spec: &PhantomSpec, n_cases: u64) -> Result<Vec<PhantomCase>> {
    (0..n_cases)
        .into_par_iter()
        .map(|i| generate_case(spec, i))
        .collect()
}

/// Applies scripted edits to a perfect copy of `gt` and returns the
/// edited prediction together with the metrics report this prediction
/// must produce — computed from the manifest and the edits alone, via
/// the same count arithmetic the evaluator uses, so an
/// `evaluate_pair(pred, gt, connectivity, 0.0)` comparison is exact.
/// The expectation assumes no minimum-size filtering.
///
/// # Errors
///
/// `invalid-lesion-id` when an op names an id the manifest does not hold
/// (or one already dropped); `invariant-violation` when a blob leaves
/// the volume or lands within a voxel of an existing structure, or when
/// `gt` and the manifest disagree.
pub fn perturb(
    gt: &BinaryMask,
    manifest: &PhantomManifest,
    ops: &[PerturbOp],
    connectivity: Connectivity,
) -> Result<(BinaryMask, MetricsReport)> {
    if gt.dims() != manifest.dims {
        return Err(Error::InvariantViolation(format!(
            "mask is {:?} but manifest says {:?}",
            gt.dims(),
            manifest.dims
        )));
    }
    let labeled = label_components(gt, connectivity);
    if labeled.len() != manifest.lesions.len() {
        return Err(Error::InvariantViolation(format!(
            "mask has {} components, manifest lists {}",
            labeled.len(),
            manifest.lesions.len()
        )));
    }
    for (component, record) in labeled.lesions.iter().zip(&manifest.lesions) {
        if component.id != record.id || component.voxels.len() as u64 != record.voxels {
            return Err(Error::InvariantViolation(format!(
                "component {} does not match manifest record {} ({} vs {} voxels)",
                component.id,
                record.id,
                component.voxels.len(),
                record.voxels
            )));
        }
    }

    let dims = gt.dims();
    let (nx, ny, _) = dims;
    let linear = |v: (u32, u32, u32)| v.0 as usize + nx * (v.1 as usize + ny * v.2 as usize);
    let gt_bools = gt.to_bools();
    let mut pred = gt_bools.clone();

    struct LesionState {
        voxels: Vec<(u32, u32, u32)>,
        dropped: bool,
        eroded: bool,
    }
    let mut lesions: Vec<LesionState> = labeled
        .lesions
        .iter()
        .map(|l| LesionState {
            voxels: l.voxels.clone(),
            dropped: false,
            eroded: false,
        })
        .collect();
    let mut blobs: Vec<Vec<(u32, u32, u32)>> = Vec::new();

    let lesion_index = |lesions: &[LesionState], id: u32| -> Result<usize> {
        let idx = (id as usize)
            .checked_sub(1)
            .filter(|&i| i < lesions.len())
            .ok_or(Error::InvalidLesionId(id))?;
        if lesions[idx].dropped {
            return Err(Error::InvalidLesionId(id));
        }
        Ok(idx)
    };

    for op in ops {
        match op {
            PerturbOp::DropLesion(id) => {
                let idx = lesion_index(&lesions, *id)?;
                for &v in &lesions[idx].voxels {
                    pred[linear(v)] = false;
                }
                lesions[idx].voxels.clear();
                lesions[idx].dropped = true;
            }
            PerturbOp::ErodeLesion(id) => {
                let idx = lesion_index(&lesions, *id)?;
                // Separation keeps other structures out of the
                // neighborhood, so the prediction mask doubles as this
                // lesion's membership test.
                let kept: Vec<(u32, u32, u32)> = lesions[idx]
                    .voxels
                    .iter()
                    .copied()
                    .filter(|&(x, y, z)| {
                        let (x, y, z) = (x as i64, y as i64, z as i64);
                        [
                            (x - 1, y, z),
                            (x + 1, y, z),
                            (x, y - 1, z),
                            (x, y + 1, z),
                            (x, y, z - 1),
                            (x, y, z + 1),
                        ]
                        .iter()
                        .all(|&(ax, ay, az)| {
                            gt.volume().in_bounds(ax, ay, az)
                                && pred[linear((ax as u32, ay as u32, az as u32))]
                        })
                    })
                    .collect();
                for &v in &lesions[idx].voxels {
                    pred[linear(v)] = false;
                }
                for &v in &kept {
                    pred[linear(v)] = true;
                }
                lesions[idx].voxels = kept;
                lesions[idx].eroded = true;
            }
            PerturbOp::AddBlob { center, radius_mm } => {
                let c = (center.0 as i64, center.1 as i64, center.2 as i64);
                let voxels = rasterize_ellipsoid(dims, gt.spacing(), c, *radius_mm)
                    .ok_or_else(|| {
                        Error::InvariantViolation(format!(
                            "blob at {center:?} with radius {radius_mm} mm leaves the volume"
                        ))
                    })?;
                // The blob must stay out of everything's 26-neighborhood
                // so it forms exactly one new false-positive component.
                for &(x, y, z) in &voxels {
                    for dz in -1i64..=1 {
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let (ax, ay, az) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                                if !gt.volume().in_bounds(ax, ay, az) {
                                    continue;
                                }
                                let i = linear((ax as u32, ay as u32, az as u32));
                                if gt_bools[i] || pred[i] {
                                    return Err(Error::InvariantViolation(format!(
                                        "blob at {center:?} touches an existing structure"
                                    )));
                                }
                            }
                        }
                    }
                }
                for &v in &voxels {
                    pred[linear(v)] = true;
                }
                blobs.push(voxels);
            }
        }
    }

    // Expected counts. Every surviving lesion voxel set is a subset of
    // its gt lesion, so it overlaps; every blob is disjoint and
    // non-adjacent, so it is one false-positive component.
    let mut pred_components = 0u64;
    let mut detected = 0u64;
    let mut overlap = 0u64;
    for state in &lesions {
        if state.dropped || state.voxels.is_empty() {
            continue;
        }
        detected += 1;
        overlap += state.voxels.len() as u64;
        if state.eroded {
            // Erosion can split a lesion; count the pieces.
            let mut piece = vec![false; pred.len()];
            for &v in &state.voxels {
                piece[linear(v)] = true;
            }
            let piece_mask = BinaryMask::from_bools(dims, gt.spacing(), &piece)?;
            pred_components += label_components(&piece_mask, connectivity).len() as u64;
        } else {
            pred_components += 1;
        }
    }
    let blob_voxels: u64 = blobs.iter().map(|b| b.len() as u64).sum();
    let counts = PairCounts {
        pred_voxels: overlap + blob_voxels,
        gt_voxels: gt.count_positive(),
        overlap_voxels: overlap,
        gt_lesions: manifest.lesions.len() as u64,
        pred_lesions: pred_components + blobs.len() as u64,
        detected_lesions: detected,
        false_lesions: blobs.len() as u64,
    };
    let report = MetricsReport::from_counts(counts, gt.volume().voxel_volume_mm3());
    let mask = BinaryMask::from_bools(dims, gt.spacing(), &pred)?;
    Ok((mask, report))
}

/// Ready-made specs used across tests and the synth command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    /// Lesions glow in both channels; candidate selection plus either
    /// stage separates them cleanly.
    Separable,
    /// Decoy blobs match lesions in channel 0 but not in channel 1, so
    /// an intensity cut (and a stage trained mostly on it) admits them
    /// while the second stage can reject them.
    Stage1Fooling,
    /// Lesion contrast close to the noise floor; prior knowledge helps.
    Hard,
}

impl std::fmt::Display for PresetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PresetKind::Separable => "separable",
            PresetKind::Stage1Fooling => "stage1-fooling",
            PresetKind::Hard => "hard",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(PresetKind::Separable),
            "stage1-fooling" => Ok(PresetKind::Stage1Fooling),
            "hard" => Ok(PresetKind::Hard),
            other => Err(Error::InvalidKey(format!(
                "unknown preset {other:?} (expected separable, stage1-fooling, or hard)"
            ))),
        }
    }
}

/// The spec behind a preset. Sized for quick generation and training on
/// a single core.
pub fn preset_spec(kind: PresetKind, seed: u64) -> PhantomSpec {
    match kind {
        PresetKind::Separable => PhantomSpec {
            dims: (32, 32, 20),
            spacing: (1.0, 1.0, 1.0),
            n_lesions: 4,
            lesion_radius_mm: (1.5, 2.5),
            min_separation_voxels: 3.0,
            channels: vec![
                ChannelSpec {
                    name: "FLAIR".to_string(),
                    intensity: IntensitySpec::uniform(100.0, 5.0, 300.0, 5.0),
                },
                ChannelSpec {
                    name: "T2".to_string(),
                    intensity: IntensitySpec::uniform(100.0, 5.0, 300.0, 5.0),
                },
            ],
            blobs: None,
            seed,
        },
        PresetKind::Stage1Fooling => PhantomSpec {
            dims: (48, 48, 30),
            spacing: (1.0, 1.0, 1.0),
            n_lesions: 4,
            lesion_radius_mm: (1.5, 2.5),
            min_separation_voxels: 3.0,
            channels: vec![
                ChannelSpec {
                    name: "FLAIR".to_string(),
                    intensity: IntensitySpec {
                        background_mean: 100.0,
                        background_sd: 5.0,
                        lesion_mean: 300.0,
                        lesion_sd: 5.0,
                        blob_mean: 300.0,
                        blob_sd: 5.0,
                    },
                },
                ChannelSpec {
                    name: "T2".to_string(),
                    intensity: IntensitySpec {
                        background_mean: 100.0,
                        background_sd: 5.0,
                        lesion_mean: 140.0,
                        lesion_sd: 5.0,
                        blob_mean: 110.0,
                        blob_sd: 5.0,
                    },
                },
            ],
            blobs: Some(BlobSpec {
                count: 2,
                radius_mm: (1.5, 2.5),
            }),
            seed,
        },
        PresetKind::Hard => PhantomSpec {
            dims: (24, 24, 16),
            spacing: (1.0, 1.0, 1.0),
            n_lesions: 3,
            lesion_radius_mm: (1.5, 2.2),
            min_separation_voxels: 2.0,
            channels: vec![
                ChannelSpec {
                    name: "FLAIR".to_string(),
                    intensity: IntensitySpec::uniform(100.0, 15.0, 115.0, 15.0),
                },
                ChannelSpec {
                    name: "T2".to_string(),
                    intensity: IntensitySpec::uniform(100.0, 15.0, 115.0, 15.0),
                },
            ],
            blobs: None,
            seed,
        },
    }
}
