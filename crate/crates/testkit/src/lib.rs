//! Slow-but-obvious reference implementations the test suites compare
//! the real crate against, plus seeded input generators.
//!
//! Nothing here shares algorithmic code with `lesionbench-core`: the
//! connected-components oracle is a plain flood fill, the evaluation
//! oracle is literal set arithmetic, the Wilcoxon oracle enumerates all
//! 2ⁿ sign assignments, and the kNN oracle sorts the full distance
//! list. Keep it that way — an oracle that calls the code under test
//! proves nothing.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lesionbench_core::volume::{BinaryMask, ProbabilityMap, Volume};

/// The fixed generator every test seeds the same way.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A mask with each voxel positive independently with probability `fill`.
pub fn random_mask(
    rng: &mut ChaCha8Rng,
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    fill: f64,
) -> BinaryMask {
    let n = dims.0 * dims.1 * dims.2;
    let bools: Vec<bool> = (0..n).map(|_| rng.random_bool(fill)).collect();
    BinaryMask::from_bools(dims, spacing, &bools).expect("bools are always a valid mask")
}

/// A float volume with voxels uniform in `lo..hi`.
pub fn random_volume(
    rng: &mut ChaCha8Rng,
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    lo: f32,
    hi: f32,
) -> Volume {
    let n = dims.0 * dims.1 * dims.2;
    let data: Vec<f32> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Volume::from_f32(dims, spacing, data).expect("generated data matches dims")
}

/// A probability map with voxels uniform in [0, 1).
pub fn random_probability_map(
    rng: &mut ChaCha8Rng,
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
) -> ProbabilityMap {
    let n = dims.0 * dims.1 * dims.2;
    let data: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    ProbabilityMap::from_f32(dims, spacing, data).expect("values are in range")
}

/// Whether two voxels are adjacent under the given neighborhood size,
/// written straight from the definition: 6 shares a face, 18 a face or
/// edge, 26 anything in the 3×3×3 box.
fn adjacent(a: (usize, usize, usize), b: (usize, usize, usize), neighborhood: u8) -> bool {
    let dx = (a.0 as i64 - b.0 as i64).abs();
    let dy = (a.1 as i64 - b.1 as i64).abs();
    let dz = (a.2 as i64 - b.2 as i64).abs();
    if dx > 1 || dy > 1 || dz > 1 || (dx, dy, dz) == (0, 0, 0) {
        return false;
    }
    match neighborhood {
        6 => dx + dy + dz == 1,
        18 => dx + dy + dz <= 2,
        26 => true,
        other => panic!("neighborhood must be 6, 18, or 26, got {other}"),
    }
}

/// Connected components by breadth-first flood fill. Returns each
/// component as a list of linear voxel indices; components are ordered
/// by their first voxel in scan order, voxels within a component come
/// out sorted.
pub fn flood_components(
    flags: &[bool],
    dims: (usize, usize, usize),
    neighborhood: u8,
) -> Vec<Vec<usize>> {
    let (nx, ny, nz) = dims;
    assert_eq!(flags.len(), nx * ny * nz, "flag count must match dims");
    let coords = |i: usize| (i % nx, (i / nx) % ny, i / (nx * ny));
    let mut seen = vec![false; flags.len()];
    let mut components = Vec::new();
    for start in 0..flags.len() {
        if !flags[start] || seen[start] {
            continue;
        }
        let mut component = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (x, y, z) = coords(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ax, ay, az) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if ax < 0
                            || ay < 0
                            || az < 0
                            || ax >= nx as i64
                            || ay >= ny as i64
                            || az >= nz as i64
                        {
                            continue;
                        }
                        let j = ax as usize + nx * (ay as usize + ny * az as usize);
                        if flags[j]
                            && !seen[j]
                            && adjacent((x, y, z), (ax as usize, ay as usize, az as usize), neighborhood)
                        {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

/// What the literal-set-arithmetic evaluation of a mask pair yields.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceEval {
    pub pred_voxels: u64,
    pub gt_voxels: u64,
    pub overlap_voxels: u64,
    pub gt_lesions: u64,
    pub pred_lesions: u64,
    pub detected_lesions: u64,
    pub false_lesions: u64,
    pub dice: f64,
    pub tp_rate: Option<f64>,
    pub ltpr: Option<f64>,
    pub lfpr: Option<f64>,
    pub vd: Option<f64>,
}

/// Evaluates a prediction against a ground truth the slow way:
/// flood-fill both masks, drop components below `min_mm3` on both
/// sides, then count voxel and component overlaps by brute-force
/// membership tests.
pub fn brute_force_eval(
    pred: &[bool],
    gt: &[bool],
    dims: (usize, usize, usize),
    voxel_volume_mm3: f64,
    neighborhood: u8,
    min_mm3: f64,
) -> BruteForceEval {
    let keep = |components: Vec<Vec<usize>>| -> Vec<Vec<usize>> {
        components
            .into_iter()
            .filter(|c| c.len() as f64 * voxel_volume_mm3 >= min_mm3)
            .collect()
    };
    let pred_components = keep(flood_components(pred, dims, neighborhood));
    let gt_components = keep(flood_components(gt, dims, neighborhood));

    let mut pred_kept = vec![false; pred.len()];
    for c in &pred_components {
        for &i in c {
            pred_kept[i] = true;
        }
    }
    let mut gt_kept = vec![false; gt.len()];
    for c in &gt_components {
        for &i in c {
            gt_kept[i] = true;
        }
    }

    let pred_voxels = pred_kept.iter().filter(|&&b| b).count() as u64;
    let gt_voxels = gt_kept.iter().filter(|&&b| b).count() as u64;
    let overlap_voxels = pred_kept
        .iter()
        .zip(&gt_kept)
        .filter(|&(&p, &g)| p && g)
        .count() as u64;

    let detected_lesions = gt_components
        .iter()
        .filter(|c| c.iter().any(|&i| pred_kept[i]))
        .count() as u64;
    let false_lesions = pred_components
        .iter()
        .filter(|c| !c.iter().any(|&i| gt_kept[i]))
        .count() as u64;

    let p = pred_voxels as f64;
    let g = gt_voxels as f64;
    let dice = if pred_voxels + gt_voxels == 0 {
        1.0
    } else {
        2.0 * overlap_voxels as f64 / (p + g)
    };
    BruteForceEval {
        pred_voxels,
        gt_voxels,
        overlap_voxels,
        gt_lesions: gt_components.len() as u64,
        pred_lesions: pred_components.len() as u64,
        detected_lesions,
        false_lesions,
        dice,
        tp_rate: (gt_voxels > 0).then(|| overlap_voxels as f64 / g),
        ltpr: (!gt_components.is_empty())
            .then(|| detected_lesions as f64 / gt_components.len() as f64),
        lfpr: (!pred_components.is_empty())
            .then(|| false_lesions as f64 / pred_components.len() as f64),
        vd: (gt_voxels > 0).then(|| (p - g).abs() / g),
    }
}

/// Wilcoxon signed-rank by full enumeration: every one of the 2ⁿ sign
/// assignments of the effective ranks is generated and counted.
/// Returns (n_effective, w, two-sided p). Panics beyond n = 20 — the
/// point is a small independent cross-check, not a usable test.
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64], pratt: bool) -> (usize, f64, f64) {
    assert_eq!(a.len(), b.len());
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let ranked: Vec<f64> = if pratt {
        diffs.clone()
    } else {
        diffs.iter().copied().filter(|d| *d != 0.0).collect()
    };
    let n_effective = ranked.iter().filter(|d| **d != 0.0).count();
    if n_effective == 0 {
        return (0, 0.0, 1.0);
    }
    assert!(n_effective <= 20, "enumeration oracle capped at n = 20");

    // Average ranks of |d|, recomputed from scratch.
    let mut sorted: Vec<f64> = ranked.iter().map(|d| d.abs()).collect();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let rank_of = |v: f64| -> f64 {
        let below = sorted.iter().filter(|&&s| s < v).count();
        let equal = sorted.iter().filter(|&&s| s == v).count();
        // Ranks below+1 ..= below+equal average to below + (equal + 1)/2.
        below as f64 + (equal as f64 + 1.0) / 2.0
    };

    let kept: Vec<f64> = ranked
        .iter()
        .filter(|d| **d != 0.0)
        .map(|d| rank_of(d.abs()))
        .collect();
    let w_pos: f64 = ranked
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|&d| rank_of(d.abs()))
        .sum();
    let w_neg: f64 = ranked
        .iter()
        .filter(|&&d| d < 0.0)
        .map(|&d| rank_of(d.abs()))
        .sum();
    let w = w_pos.min(w_neg);

    let m = kept.len();
    let mut at_or_below = 0u64;
    for assignment in 0..(1u64 << m) {
        let sum: f64 = kept
            .iter()
            .enumerate()
            .filter(|&(i, _)| assignment & (1 << i) != 0)
            .map(|(_, &r)| r)
            .sum();
        if sum <= w {
            at_or_below += 1;
        }
    }
    let p = (2.0 * at_or_below as f64 / (1u64 << m) as f64).min(1.0);
    (n_effective, w, p)
}

/// Patch features the slow way: center voxel, mean, and population
/// variance per channel block.
pub fn naive_features(values: &[f32], edge: usize, n_channels: usize) -> Vec<f64> {
    let block = edge * edge * edge;
    assert_eq!(values.len(), block * n_channels);
    let mut out = Vec::with_capacity(3 * n_channels);
    for c in 0..n_channels {
        let chunk = &values[c * block..(c + 1) * block];
        let mean = chunk.iter().map(|&v| v as f64).sum::<f64>() / block as f64;
        let var = chunk
            .iter()
            .map(|&v| (v as f64 - mean) * (v as f64 - mean))
            .sum::<f64>()
            / block as f64;
        out.push(chunk[block / 2] as f64);
        out.push(mean);
        out.push(var);
    }
    out
}

/// kNN vote by sorting the entire distance list. Standardization (mean
/// 0, sample sd 1, zero-variance dimensions dropped) and the
/// insertion-order tie rule are reimplemented from their definitions.
pub fn knn_vote(train: &[(Vec<f64>, bool)], query: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= train.len());
    let d_raw = train[0].0.len();
    assert!(train.iter().all(|(f, _)| f.len() == d_raw));
    assert_eq!(query.len(), d_raw);
    let n = train.len();

    let mut retained = Vec::new();
    for j in 0..d_raw {
        let mean = train.iter().map(|(f, _)| f[j]).sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (train
                .iter()
                .map(|(f, _)| (f[j] - mean) * (f[j] - mean))
                .sum::<f64>()
                / (n - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        if sd > 0.0 {
            retained.push((j, mean, sd));
        }
    }

    let standardize = |f: &[f64]| -> Vec<f64> {
        retained
            .iter()
            .map(|&(j, mean, sd)| (f[j] - mean) / sd)
            .collect()
    };
    let q = standardize(query);
    let mut by_distance: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (f, _))| {
            let z = standardize(f);
            let d2 = z
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            (d2, i)
        })
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let votes = by_distance[..k].iter().filter(|&&(_, i)| train[i].1).count();
    votes as f64 / k as f64
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the
/// empirical CDFs.
pub fn cdf_distance(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    let mut max_gap = 0.0f64;
    for &t in &points {
        let fx = xs.partition_point(|&v| v <= t) as f64 / xs.len() as f64;
        let fy = ys.partition_point(|&v| v <= t) as f64 / ys.len() as f64;
        max_gap = max_gap.max((fx - fy).abs());
    }
    max_gap
}
