//! Training and application of the two-stage cascade.
//!
//! Stage 1 learns to score every candidate voxel (channel 0 drives
//! candidate selection). Stage 2 is trained only on the voxels stage 1
//! calls positive, so it specializes in the hard negatives that survive
//! the first cut. At apply time the final probability map carries the
//! stage-2 score on stage-1 positives and zero elsewhere, which makes the
//! containment chain `final mask ⊆ stage-1 positives ⊆ candidates` hold
//! by construction.

use rayon::prelude::*;

use crate::conncomp::{filter_min_size, label_components, to_mask, Connectivity};
use crate::error::{Error, Result};
use crate::stats::{default_threshold_grid, optimize_threshold};
use crate::volume::{BinaryMask, ProbabilityMap, Volume};

use super::model::{CascadeModel, Classifier, ClassifierFactory, ConstantClassifier};
use super::normalize::{histogram_match_to, HistogramReference};
use super::patches::{balance_classes, patch_values_into, Patch, PatchLabel, PatchSpec};
use super::{candidate_flags, PRIOR_CHANNEL};

/// One subject: aligned input channels plus the reference mask.
#[derive(Debug, Clone)]
pub struct CascadeCase {
    pub id: String,
    pub channels: Vec<Volume>,
    pub gt: BinaryMask,
}

/// Training knobs beyond the patch layout. `Default` gives the standard
/// pipeline: candidates at mean foreground intensity, stage-1 gate at
/// 0.5, the full 0..=1 threshold grid, no size filter, 26-connectivity,
/// histogram matching on.
#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub seed: u64,
    /// Candidate cut as a fraction of mean foreground intensity of
    /// channel 0.
    pub candidate_frac: f64,
    /// Stage-1 probability above which a voxel goes on to stage 2.
    pub stage1_threshold: f64,
    /// Grid searched for the final binarization threshold.
    pub threshold_grid: Vec<f64>,
    /// Minimum lesion size applied to the final mask.
    pub min_lesion_mm3: f64,
    pub connectivity: Connectivity,
    /// When false, channels are used as-is and the model stores no
    /// normalization references.
    pub histogram_matching: bool,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            seed: 0,
            candidate_frac: 1.0,
            stage1_threshold: 0.5,
            threshold_grid: default_threshold_grid(),
            min_lesion_mm3: 0.0,
            connectivity: Connectivity::TwentySix,
            histogram_matching: true,
        }
    }
}

/// Every intermediate of one cascade application, for inspection and
/// per-stage evaluation.
#[derive(Debug, Clone)]
pub struct CascadeStages {
    /// Voxels that passed the intensity cut on channel 0.
    pub candidates: BinaryMask,
    /// Candidates that stage 1 scored above the gate.
    pub stage1_mask: BinaryMask,
    /// Stage-2 scores on stage-1 positives, zero elsewhere.
    pub probability: ProbabilityMap,
    /// The probability map binarized and size-filtered.
    pub mask: BinaryMask,
}

fn validate_cases(cases: &[CascadeCase], spec: &PatchSpec) -> Result<()> {
    for case in cases {
        if case.channels.len() != spec.n_channels() {
            return Err(Error::ChannelMismatch(format!(
                "case {:?} has {} channels, spec names {} ({})",
                case.id,
                case.channels.len(),
                spec.n_channels(),
                spec.channels().join(", ")
            )));
        }
        for ch in &case.channels {
            if !ch.same_grid(case.gt.volume()) {
                return Err(Error::GridMismatch(ch.grid_diff(case.gt.volume())));
            }
        }
    }
    Ok(())
}

/// Pooled per-channel references from the training cohort. The prior
/// channel is a probability and stays untouched, as does everything when
/// matching is disabled.
fn build_references(
    train: &[CascadeCase],
    spec: &PatchSpec,
    enabled: bool,
) -> Result<Vec<Option<HistogramReference>>> {
    let mut refs = Vec::with_capacity(spec.n_channels());
    for (ci, name) in spec.channels().iter().enumerate() {
        if !enabled || name == PRIOR_CHANNEL {
            refs.push(None);
        } else {
            let volumes: Vec<&Volume> = train.iter().map(|c| &c.channels[ci]).collect();
            refs.push(Some(HistogramReference::from_volumes(&volumes)?));
        }
    }
    Ok(refs)
}

fn normalized_channel_data(
    channels: &[Volume],
    refs: &[Option<HistogramReference>],
) -> Result<Vec<Vec<f32>>> {
    if channels.len() != refs.len() {
        return Err(Error::ChannelMismatch(format!(
            "{} channels but {} normalization references",
            channels.len(),
            refs.len()
        )));
    }
    channels
        .iter()
        .zip(refs)
        .map(|(vol, reference)| match reference {
            Some(r) => Ok(histogram_match_to(vol, r)?.to_f32_vec()),
            None => Ok(vol.to_f32_vec()),
        })
        .collect()
}

fn flag_centers(flags: &[bool], dims: (usize, usize, usize)) -> Vec<(u32, u32, u32)> {
    let (nx, ny, _) = dims;
    flags
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f)
        .map(|(i, _)| {
            let x = i % nx;
            let y = (i / nx) % ny;
            let z = i / (nx * ny);
            (x as u32, y as u32, z as u32)
        })
        .collect()
}

#[inline]
fn linear(center: (u32, u32, u32), dims: (usize, usize, usize)) -> usize {
    center.0 as usize + dims.0 * (center.1 as usize + dims.1 * center.2 as usize)
}

fn labeled_patches(
    data: &[Vec<f32>],
    dims: (usize, usize, usize),
    spec: &PatchSpec,
    centers: &[(u32, u32, u32)],
    gt: &BinaryMask,
) -> Vec<Patch> {
    centers
        .iter()
        .map(|&center| {
            let mut values = Vec::with_capacity(spec.values_len());
            let padded = patch_values_into(data, dims, spec.edge(), center, &mut values);
            let label = if gt.get(linear(center, dims)) {
                PatchLabel::Lesion
            } else {
                PatchLabel::Background
            };
            Patch {
                center,
                edge: spec.edge(),
                n_channels: spec.n_channels(),
                values,
                label: Some(label),
                padded,
            }
        })
        .collect()
}

/// Scores each center in order. Parallel over centers; the indexed
/// collect keeps the output order equal to the input order regardless of
/// thread count.
fn predict_centers(
    classifier: &dyn Classifier,
    data: &[Vec<f32>],
    dims: (usize, usize, usize),
    spec: &PatchSpec,
    centers: &[(u32, u32, u32)],
) -> Result<Vec<f64>> {
    centers
        .par_iter()
        .map(|&center| {
            let mut values = Vec::with_capacity(spec.values_len());
            let padded = patch_values_into(data, dims, spec.edge(), center, &mut values);
            let patch = Patch {
                center,
                edge: spec.edge(),
                n_channels: spec.n_channels(),
                values,
                label: None,
                padded,
            };
            let p = classifier.predict(&patch)?;
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::InvariantViolation(format!(
                    "classifier returned probability {p} outside [0, 1]"
                )));
            }
            Ok(p)
        })
        .collect()
}

/// Balances the pool and hands it to the factory. A single-class pool has
/// nothing for a discriminative learner, so it degrades to the matching
/// constant instead of failing the whole run — on cleanly separable data
/// stage 2 routinely sees only lesions.
fn train_stage(
    pool: Vec<Patch>,
    seed: u64,
    factory: &ClassifierFactory,
) -> Result<Box<dyn Classifier>> {
    let positives = pool
        .iter()
        .filter(|p| p.label == Some(PatchLabel::Lesion))
        .count();
    if positives == 0 {
        return Ok(Box::new(ConstantClassifier::new(0.0)?));
    }
    if positives == pool.len() {
        return Ok(Box::new(ConstantClassifier::new(1.0)?));
    }
    factory(&balance_classes(pool, seed)?)
}

struct StageMaps {
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    candidates: Vec<bool>,
    stage1_positive: Vec<bool>,
    probability: ProbabilityMap,
}

/// Runs normalization, candidate selection, and both classifier stages,
/// stopping short of binarization.
fn stage_maps(model: &CascadeModel, channels: &[Volume]) -> Result<StageMaps> {
    let spec = &model.patch_spec;
    if channels.len() != spec.n_channels() {
        return Err(Error::ChannelMismatch(format!(
            "{} channels supplied, model expects {} ({})",
            channels.len(),
            spec.n_channels(),
            spec.channels().join(", ")
        )));
    }
    let first = &channels[0];
    for other in &channels[1..] {
        if !first.same_grid(other) {
            return Err(Error::GridMismatch(first.grid_diff(other)));
        }
    }
    let dims = first.dims();
    let spacing = first.spacing();

    let data = normalized_channel_data(channels, &model.histogram_refs)?;
    let candidates = candidate_flags(&data[0], model.candidate_frac)?;
    let centers = flag_centers(&candidates, dims);

    let stage1_scores = predict_centers(model.stage1.as_ref(), &data, dims, spec, &centers)?;
    let mut stage1_positive = vec![false; first.len()];
    let mut positive_centers = Vec::new();
    for (&center, &score) in centers.iter().zip(&stage1_scores) {
        if score > model.stage1_threshold {
            stage1_positive[linear(center, dims)] = true;
            positive_centers.push(center);
        }
    }

    let stage2_scores =
        predict_centers(model.stage2.as_ref(), &data, dims, spec, &positive_centers)?;
    let mut prob = vec![0.0f32; first.len()];
    for (&center, &score) in positive_centers.iter().zip(&stage2_scores) {
        prob[linear(center, dims)] = score as f32;
    }
    let probability = ProbabilityMap::from_f32(dims, spacing, prob)?;

    Ok(StageMaps {
        dims,
        spacing,
        candidates,
        stage1_positive,
        probability,
    })
}

/// Trains the cascade with default configuration and the given seed.
/// See [`train_cascade_with`].
pub fn train_cascade(
    train: &[CascadeCase],
    val: &[CascadeCase],
    factory: &ClassifierFactory,
    spec: &PatchSpec,
    seed: u64,
) -> Result<CascadeModel> {
    let config = CascadeConfig {
        seed,
        ..CascadeConfig::default()
    };
    train_cascade_with(train, val, factory, spec, &config)
}

/// Trains both stages and tunes the final threshold.
///
/// Stage 1 trains on class-balanced patches at candidate voxels of every
/// training case; stage 2 trains the same way but only on voxels stage 1
/// scored above the gate. The binarization threshold maximizes
/// `mean dice + (1 − mean lesion false-positive rate)` over the
/// validation cases — or over the training cases when `val` is empty.
/// Balancing draws from the run seed (stage 1 uses `seed + 1`, stage 2
/// `seed + 2`), so equal inputs and seed give an identical model.
///
/// # Errors
///
/// `insufficient-data` without training cases; `channel-mismatch` /
/// `grid-mismatch` on malformed cases; `stage1-degenerate` when stage 1
/// marks no training voxel positive (nothing for stage 2 to learn from);
/// plus anything the factory or normalization reports.
pub fn train_cascade_with(
    train: &[CascadeCase],
    val: &[CascadeCase],
    factory: &ClassifierFactory,
    spec: &PatchSpec,
    config: &CascadeConfig,
) -> Result<CascadeModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "cascade training needs at least one case".to_string(),
        ));
    }
    validate_cases(train, spec)?;
    validate_cases(val, spec)?;

    let refs = build_references(train, spec, config.histogram_matching)?;

    struct Prepared<'a> {
        case: &'a CascadeCase,
        data: Vec<Vec<f32>>,
        centers: Vec<(u32, u32, u32)>,
    }
    let mut prepared = Vec::with_capacity(train.len());
    for case in train {
        let data = normalized_channel_data(&case.channels, &refs)?;
        let flags = candidate_flags(&data[0], config.candidate_frac)?;
        let centers = flag_centers(&flags, case.gt.dims());
        prepared.push(Prepared {
            case,
            data,
            centers,
        });
    }

    let mut stage1_pool = Vec::new();
    for p in &prepared {
        stage1_pool.extend(labeled_patches(
            &p.data,
            p.case.gt.dims(),
            spec,
            &p.centers,
            &p.case.gt,
        ));
    }
    if stage1_pool.is_empty() {
        return Err(Error::Stage1Degenerate);
    }
    let stage1 = train_stage(stage1_pool, config.seed.wrapping_add(1), factory)?;

    let mut stage2_pool = Vec::new();
    for p in &prepared {
        let scores = predict_centers(stage1.as_ref(), &p.data, p.case.gt.dims(), spec, &p.centers)?;
        let positives: Vec<(u32, u32, u32)> = p
            .centers
            .iter()
            .zip(&scores)
            .filter(|&(_, &s)| s > config.stage1_threshold)
            .map(|(&c, _)| c)
            .collect();
        stage2_pool.extend(labeled_patches(
            &p.data,
            p.case.gt.dims(),
            spec,
            &positives,
            &p.case.gt,
        ));
    }
    if stage2_pool.is_empty() {
        return Err(Error::Stage1Degenerate);
    }
    let stage2 = train_stage(stage2_pool, config.seed.wrapping_add(2), factory)?;

    let mut model = CascadeModel {
        patch_spec: spec.clone(),
        candidate_frac: config.candidate_frac,
        stage1_threshold: config.stage1_threshold,
        binarization_threshold: 0.5, // placeholder until tuned below
        min_lesion_mm3: config.min_lesion_mm3,
        connectivity: config.connectivity,
        histogram_refs: refs,
        seed: config.seed,
        stage1,
        stage2,
    };

    let tuning = if val.is_empty() { train } else { val };
    let mut pairs = Vec::with_capacity(tuning.len());
    for case in tuning {
        let maps = stage_maps(&model, &case.channels)?;
        pairs.push((maps.probability, case.gt.clone()));
    }
    model.binarization_threshold = optimize_threshold(
        &pairs,
        &config.threshold_grid,
        config.min_lesion_mm3,
        config.connectivity,
    )?;

    Ok(model)
}

/// Applies a trained cascade to one case's channels.
///
/// The probability map holds stage-2 scores on stage-1 positive voxels
/// and zero elsewhere; the mask is that map binarized at the model's
/// threshold and size-filtered.
///
/// # Errors
///
/// `channel-mismatch` / `grid-mismatch` on malformed input; `empty-volume`
/// when channel 0 has no foreground to select candidates from.
pub fn apply_cascade(
    model: &CascadeModel,
    channels: &[Volume],
) -> Result<(ProbabilityMap, BinaryMask)> {
    let stages = apply_cascade_stages(model, channels)?;
    Ok((stages.probability, stages.mask))
}

/// [`apply_cascade`], keeping every intermediate mask.
pub fn apply_cascade_stages(model: &CascadeModel, channels: &[Volume]) -> Result<CascadeStages> {
    let maps = stage_maps(model, channels)?;
    let binary = maps.probability.binarize(model.binarization_threshold)?;
    let labeled = label_components(&binary, model.connectivity);
    let mask = to_mask(&filter_min_size(&labeled, model.min_lesion_mm3)?);
    let candidates = BinaryMask::from_bools(maps.dims, maps.spacing, &maps.candidates)?;
    let stage1_mask = BinaryMask::from_bools(maps.dims, maps.spacing, &maps.stage1_positive)?;
    Ok(CascadeStages {
        candidates,
        stage1_mask,
        probability: maps.probability,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Volume;

    const DIMS: (usize, usize, usize) = (12, 12, 6);
    const SPACING: (f32, f32, f32) = (1.0, 1.0, 1.0);

    /// Channel 0 bright on lesions and on one decoy blob; channel 1
    /// bright on lesions only. Stage 2's second channel separates the
    /// decoy.
    fn scene() -> CascadeCase {
        let n = DIMS.0 * DIMS.1 * DIMS.2;
        let mut ch0 = vec![10.0f32; n];
        let mut ch1 = vec![10.0f32; n];
        let mut gt = vec![false; n];
        let at = |x: usize, y: usize, z: usize| x + DIMS.0 * (y + DIMS.1 * z);
        // A 2x2x2 lesion.
        for z in 1..3 {
            for y in 1..3 {
                for x in 1..3 {
                    ch0[at(x, y, z)] = 200.0;
                    ch1[at(x, y, z)] = 200.0;
                    gt[at(x, y, z)] = true;
                }
            }
        }
        // A decoy blob, bright only in channel 0.
        for z in 3..5 {
            for y in 8..10 {
                for x in 8..10 {
                    ch0[at(x, y, z)] = 200.0;
                }
            }
        }
        CascadeCase {
            id: "scene".to_string(),
            channels: vec![
                Volume::from_f32(DIMS, SPACING, ch0).unwrap(),
                Volume::from_f32(DIMS, SPACING, ch1).unwrap(),
            ],
            gt: BinaryMask::from_bools(DIMS, SPACING, &gt).unwrap(),
        }
    }

    fn two_channel_spec() -> PatchSpec {
        PatchSpec::new(3, vec!["FLAIR".to_string(), "T1".to_string()]).unwrap()
    }

    /// Scores 1 when the mean of the given channel's block exceeds the
    /// cut, else 0.
    struct ChannelCut {
        channel: usize,
        cut: f32,
    }

    impl Classifier for ChannelCut {
        fn kind(&self) -> &'static str {
            "channel-cut"
        }

        fn predict(&self, patch: &Patch) -> Result<f64> {
            let block = patch.channel_values(self.channel);
            let mean = block.iter().sum::<f32>() / block.len() as f32;
            Ok(if mean > self.cut { 1.0 } else { 0.0 })
        }

        fn save_payload(&self) -> Result<serde_json::Value> {
            Ok(serde_json::Value::Null)
        }
    }

    /// Stage 1 keys on channel 0, stage 2 on channel 1 — call order
    /// decides which, mirroring how the cascade invokes the factory.
    fn alternating_factory() -> Box<ClassifierFactory> {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        Box::new(move |_pool: &[Patch]| {
            let call = calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(Box::new(ChannelCut {
                channel: call.min(1),
                cut: 50.0,
            }) as Box<dyn Classifier>)
        })
    }

    #[test]
    fn stage_two_prunes_what_stage_one_keeps() {
        let case = scene();
        let factory = alternating_factory();
        let model = train_cascade_with(
            std::slice::from_ref(&case),
            &[],
            &factory,
            &two_channel_spec(),
            &CascadeConfig {
                histogram_matching: false,
                ..CascadeConfig::default()
            },
        )
        .unwrap();

        let stages = apply_cascade_stages(&model, &case.channels).unwrap();
        // The decoy blob passes the candidate cut and stage 1, but not
        // stage 2.
        assert!(stages.candidates.count_positive() >= 16);
        assert!(stages.stage1_mask.count_positive() >= 16);
        assert_eq!(stages.mask.to_bools(), case.gt.to_bools());

        // Containment is structural: mask ⊆ stage 1 ⊆ candidates.
        let (m, s1, cand) = (
            stages.mask.to_bools(),
            stages.stage1_mask.to_bools(),
            stages.candidates.to_bools(),
        );
        for i in 0..m.len() {
            assert!(!m[i] || s1[i], "mask voxel {i} outside stage-1 set");
            assert!(!s1[i] || cand[i], "stage-1 voxel {i} outside candidates");
        }
    }

    #[test]
    fn apply_is_deterministic() {
        let case = scene();
        let factory = alternating_factory();
        let model = train_cascade_with(
            std::slice::from_ref(&case),
            &[],
            &factory,
            &two_channel_spec(),
            &CascadeConfig {
                histogram_matching: false,
                ..CascadeConfig::default()
            },
        )
        .unwrap();
        let (p1, m1) = apply_cascade(&model, &case.channels).unwrap();
        let (p2, m2) = apply_cascade(&model, &case.channels).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn no_stage1_positives_is_degenerate() {
        let case = scene();
        // A factory whose stage-1 classifier rejects everything.
        let factory: Box<ClassifierFactory> =
            Box::new(|_pool| Ok(Box::new(ConstantClassifier::new(0.0)?) as Box<dyn Classifier>));
        let err = train_cascade_with(
            std::slice::from_ref(&case),
            &[],
            &factory,
            &two_channel_spec(),
            &CascadeConfig {
                histogram_matching: false,
                ..CascadeConfig::default()
            },
        )
        .unwrap_err();
        assert_eq!(err.code(), "stage1-degenerate");
    }

    #[test]
    fn single_class_stage_two_falls_back_to_constant() {
        let case = scene();
        // Stage 1 admits only voxels bright in channel 1 — lesions — so
        // the stage-2 pool is single-class.
        let factory: Box<ClassifierFactory> =
            Box::new(|_pool| {
                Ok(Box::new(ChannelCut {
                    channel: 1,
                    cut: 50.0,
                }) as Box<dyn Classifier>)
            });
        let model = train_cascade_with(
            std::slice::from_ref(&case),
            &[],
            &factory,
            &two_channel_spec(),
            &CascadeConfig {
                histogram_matching: false,
                ..CascadeConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.stage2.kind(), "constant");
        let (_, mask) = apply_cascade(&model, &case.channels).unwrap();
        assert_eq!(mask.to_bools(), case.gt.to_bools());
    }

    #[test]
    fn malformed_cases_are_rejected() {
        let case = scene();
        let factory = alternating_factory();
        let one_channel = CascadeCase {
            id: "short".to_string(),
            channels: vec![case.channels[0].clone()],
            gt: case.gt.clone(),
        };
        let err = train_cascade(&[one_channel], &[], &factory, &two_channel_spec(), 0).unwrap_err();
        assert_eq!(err.code(), "channel-mismatch");

        let err = train_cascade(&[], &[], &factory, &two_channel_spec(), 0).unwrap_err();
        assert_eq!(err.code(), "insufficient-data");
    }

    #[test]
    fn apply_validates_channel_count() {
        let case = scene();
        let factory = alternating_factory();
        let model = train_cascade_with(
            std::slice::from_ref(&case),
            &[],
            &factory,
            &two_channel_spec(),
            &CascadeConfig {
                histogram_matching: false,
                ..CascadeConfig::default()
            },
        )
        .unwrap();
        let err = apply_cascade(&model, &case.channels[..1]).unwrap_err();
        assert_eq!(err.code(), "channel-mismatch");
    }

    #[test]
    fn min_size_filter_reaches_the_final_mask() {
        let case = scene();
        let factory = alternating_factory();
        let model = train_cascade_with(
            std::slice::from_ref(&case),
            &[],
            &factory,
            &two_channel_spec(),
            &CascadeConfig {
                histogram_matching: false,
                min_lesion_mm3: 20.0, // the 8-voxel lesion is 8 mm³
                ..CascadeConfig::default()
            },
        );
        // Tuning may pick any threshold (every mask is empty after the
        // filter), but application must honor the filter.
        if let Ok(model) = model {
            let (_, mask) = apply_cascade(&model, &case.channels).unwrap();
            assert_eq!(mask.count_positive(), 0);
        }
    }
}
