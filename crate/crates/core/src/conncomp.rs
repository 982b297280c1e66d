//! 3-D connected-component labeling and physical lesion-size filtering.
//!
//! A lesion, for every metric in this crate, is one connected component of
//! a binary mask under a chosen neighborhood (6, 18, or 26 neighbors).
//! [`label_components`] produces them with a classic two-pass union-find
//! sweep — chosen over recursive flood fill so memory stays bounded on
//! large grids — and assigns ids deterministically: the component whose
//! first voxel appears earliest in x-fastest scan order gets the lowest
//! id, starting at 1.
//!
//! [`filter_min_size`] implements minimum-lesion-size policies in mm³, the
//! knob that drives size-threshold ROC analyses. Note the unit: physical
//! volume, not voxel count, so anisotropic grids filter consistently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Volume};

/// Voxel neighborhood: face (6), face+edge (18), or face+edge+corner (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// # Errors
    ///
    /// `invariant-violation` unless `v` is 6, 18, or 26.
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvariantViolation(format!(
                "connectivity must be 6, 18, or 26, got {other}"
            ))),
        }
    }

    /// All neighbor offsets of this neighborhood.
    pub fn offsets(self) -> Vec<(i32, i32, i32)> {
        let max_manhattan = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::with_capacity(self.as_u8() as usize);
        for dz in -1..=1i32 {
            for dy in -1..=1i32 {
                for dx in -1..=1i32 {
                    let m = dx.abs() + dy.abs() + dz.abs();
                    if m >= 1 && m <= max_manhattan {
                        out.push((dx, dy, dz));
                    }
                }
            }
        }
        out
    }

    /// Neighbor offsets that precede the current voxel in x-fastest scan
    /// order — the only ones already labeled during the forward pass.
    fn backward_offsets(self) -> Vec<(i32, i32, i32)> {
        self.offsets()
            .into_iter()
            .filter(|&(dx, dy, dz)| (dz, dy, dx) < (0, 0, 0))
            .collect()
    }
}

impl Serialize for Connectivity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Connectivity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Connectivity::from_u8(v).map_err(serde::de::Error::custom)
    }
}

/// One connected component of positive voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct Lesion {
    /// 1-based label, ordered by first-encountered voxel in scan order.
    pub id: u32,
    /// Member voxels as `(x, y, z)`, in scan order.
    pub voxels: Vec<(u32, u32, u32)>,
    /// Physical size: voxel count times voxel volume.
    pub volume_mm3: f64,
}

/// All lesions of one mask, with the grid they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionSet {
    pub lesions: Vec<Lesion>,
    pub connectivity: Connectivity,
    pub dims: (usize, usize, usize),
    pub spacing: (f32, f32, f32),
}

impl LesionSet {
    pub fn len(&self) -> usize {
        self.lesions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lesions.is_empty()
    }

    pub fn total_voxels(&self) -> u64 {
        self.lesions.iter().map(|l| l.voxels.len() as u64).sum()
    }

    /// Sum of per-lesion physical volumes.
    pub fn total_volume_mm3(&self) -> f64 {
        self.lesions.iter().map(|l| l.volume_mm3).sum()
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.0 as f64 * self.spacing.1 as f64 * self.spacing.2 as f64
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            // Path halving keeps the trees flat without a second stack.
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Keep the smaller provisional id as root.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Partitions the positive voxels of `m` into maximal connected
/// components.
///
/// Labels are deterministic regardless of how the work is scheduled: the
/// component containing the first positive voxel in x-fastest scan order
/// is lesion 1, and so on. An empty mask yields an empty set.
pub fn label_components(m: &BinaryMask, connectivity: Connectivity) -> LesionSet {
    let (nx, ny, nz) = m.dims();
    let bools = m.to_bools();
    let back = connectivity.backward_offsets();

    let mut provisional = vec![u32::MAX; bools.len()];
    let mut uf = UnionFind::new();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if !bools[i] {
                    continue;
                }
                let mut label = u32::MAX;
                for &(dx, dy, dz) in &back {
                    let xx = x as i64 + dx as i64;
                    let yy = y as i64 + dy as i64;
                    let zz = z as i64 + dz as i64;
                    if xx < 0 || yy < 0 || zz < 0 {
                        continue;
                    }
                    let (xx, yy, zz) = (xx as usize, yy as usize, zz as usize);
                    if xx >= nx || yy >= ny || zz >= nz {
                        continue;
                    }
                    let j = xx + nx * (yy + ny * zz);
                    if bools[j] {
                        let neighbor = provisional[j];
                        if label == u32::MAX {
                            label = neighbor;
                        } else {
                            uf.union(label, neighbor);
                        }
                    }
                }
                provisional[i] = if label == u32::MAX { uf.make() } else { label };
            }
        }
    }

    // Second pass: resolve roots and hand out final ids in scan order of
    // first encounter.
    let mut final_of_root = vec![u32::MAX; uf.parent.len()];
    let mut lesions: Vec<Lesion> = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if !bools[i] {
                    continue;
                }
                let root = uf.find(provisional[i]);
                let slot = if final_of_root[root as usize] == u32::MAX {
                    let idx = lesions.len() as u32;
                    final_of_root[root as usize] = idx;
                    lesions.push(Lesion {
                        id: idx + 1,
                        voxels: Vec::new(),
                        volume_mm3: 0.0,
                    });
                    idx
                } else {
                    final_of_root[root as usize]
                };
                lesions[slot as usize]
                    .voxels
                    .push((x as u32, y as u32, z as u32));
            }
        }
    }

    let vv = m.volume().voxel_volume_mm3();
    for lesion in &mut lesions {
        lesion.volume_mm3 = lesion.voxels.len() as f64 * vv;
    }

    LesionSet {
        lesions,
        connectivity,
        dims: (nx, ny, nz),
        spacing: m.spacing(),
    }
}

/// Keeps exactly the lesions with `volume_mm3 >= min_mm3`, relabeling the
/// survivors to consecutive ids in their existing order.
///
/// # Errors
///
/// `invalid-size` if `min_mm3` is negative or not finite.
pub fn filter_min_size(ls: &LesionSet, min_mm3: f64) -> Result<LesionSet> {
    if !(min_mm3.is_finite() && min_mm3 >= 0.0) {
        return Err(Error::InvalidSize(min_mm3));
    }
    let lesions = ls
        .lesions
        .iter()
        .filter(|l| l.volume_mm3 >= min_mm3)
        .enumerate()
        .map(|(i, l)| Lesion {
            id: i as u32 + 1,
            voxels: l.voxels.clone(),
            volume_mm3: l.volume_mm3,
        })
        .collect();
    Ok(LesionSet {
        lesions,
        connectivity: ls.connectivity,
        dims: ls.dims,
        spacing: ls.spacing,
    })
}

/// Rebuilds the binary mask whose positive voxels are exactly the union of
/// the set's lesions.
///
/// Voxel coordinates must be in bounds for the set's dims, which holds for
/// every set produced by [`label_components`] and [`filter_min_size`].
pub fn to_mask(ls: &LesionSet) -> BinaryMask {
    let (nx, ny, nz) = ls.dims;
    let mut data = vec![0u8; nx * ny * nz];
    for lesion in &ls.lesions {
        for &(x, y, z) in &lesion.voxels {
            data[x as usize + nx * (y as usize + ny * z as usize)] = 1;
        }
    }
    let volume = Volume::from_u8(ls.dims, ls.spacing, data)
        .expect("lesion-set grid is valid by construction");
    BinaryMask::new(volume).expect("payload is 0/1 by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(dims: (usize, usize, usize), positives: &[(usize, usize, usize)]) -> BinaryMask {
        let mut bools = vec![false; dims.0 * dims.1 * dims.2];
        for &(x, y, z) in positives {
            bools[x + dims.0 * (y + dims.1 * z)] = true;
        }
        BinaryMask::from_bools(dims, (1.0, 1.0, 1.0), &bools).unwrap()
    }

    #[test]
    fn neighborhood_sizes() {
        assert_eq!(Connectivity::Six.offsets().len(), 6);
        assert_eq!(Connectivity::Eighteen.offsets().len(), 18);
        assert_eq!(Connectivity::TwentySix.offsets().len(), 26);
        assert_eq!(Connectivity::Six.backward_offsets().len(), 3);
        assert_eq!(Connectivity::Eighteen.backward_offsets().len(), 9);
        assert_eq!(Connectivity::TwentySix.backward_offsets().len(), 13);
    }

    #[test]
    fn single_voxel_is_one_lesion() {
        let m = mask((3, 3, 3), &[(1, 1, 1)]);
        let ls = label_components(&m, Connectivity::TwentySix);
        assert_eq!(ls.len(), 1);
        assert_eq!(ls.lesions[0].id, 1);
        assert_eq!(ls.lesions[0].voxels, vec![(1, 1, 1)]);
        assert_eq!(ls.lesions[0].volume_mm3, 1.0);
    }

    #[test]
    fn empty_mask_yields_empty_set() {
        let m = mask((3, 3, 3), &[]);
        assert!(label_components(&m, Connectivity::Six).is_empty());
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let m = mask((2, 2, 2), &[(0, 0, 0), (1, 1, 1)]);
        assert_eq!(label_components(&m, Connectivity::TwentySix).len(), 1);
        assert_eq!(label_components(&m, Connectivity::Eighteen).len(), 2);
        assert_eq!(label_components(&m, Connectivity::Six).len(), 2);
    }

    #[test]
    fn edge_diagonal_pair_joins_at_18() {
        let m = mask((2, 2, 1), &[(0, 0, 0), (1, 1, 0)]);
        assert_eq!(label_components(&m, Connectivity::TwentySix).len(), 1);
        assert_eq!(label_components(&m, Connectivity::Eighteen).len(), 1);
        assert_eq!(label_components(&m, Connectivity::Six).len(), 2);
    }

    #[test]
    fn ids_follow_scan_order() {
        // Component containing the scan-earliest voxel must get id 1 even
        // though another component has more voxels.
        let m = mask((5, 1, 1), &[(0, 0, 0), (2, 0, 0), (3, 0, 0)]);
        let ls = label_components(&m, Connectivity::Six);
        assert_eq!(ls.len(), 2);
        assert_eq!(ls.lesions[0].voxels, vec![(0, 0, 0)]);
        assert_eq!(ls.lesions[1].voxels, vec![(2, 0, 0), (3, 0, 0)]);
    }

    #[test]
    fn u_shape_merges_across_scan_lines() {
        // Two arms that only connect later in scan order exercise the
        // union step.
        let m = mask(
            (3, 3, 1),
            &[(0, 0, 0), (2, 0, 0), (0, 1, 0), (2, 1, 0), (0, 2, 0), (1, 2, 0), (2, 2, 0)],
        );
        let ls = label_components(&m, Connectivity::Six);
        assert_eq!(ls.len(), 1);
        assert_eq!(ls.lesions[0].voxels.len(), 7);
    }

    #[test]
    fn filter_min_size_zero_is_identity() {
        let m = mask((4, 1, 1), &[(0, 0, 0), (2, 0, 0), (3, 0, 0)]);
        let ls = label_components(&m, Connectivity::Six);
        let filtered = filter_min_size(&ls, 0.0).unwrap();
        assert_eq!(filtered, ls);
    }

    #[test]
    fn filter_min_size_drops_small_lesions_and_relabels() {
        // 4-voxel and 6-voxel lesions at 1 mm³ per voxel, threshold 5.
        let m = mask(
            (12, 1, 1),
            &[
                (0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0),
                (6, 0, 0), (7, 0, 0), (8, 0, 0), (9, 0, 0), (10, 0, 0), (11, 0, 0),
            ],
        );
        let ls = label_components(&m, Connectivity::Six);
        let filtered = filter_min_size(&ls, 5.0).unwrap();
        assert_eq!(filtered.len(), 1);
        assert_eq!(filtered.lesions[0].id, 1);
        assert_eq!(filtered.lesions[0].voxels.len(), 6);
    }

    #[test]
    fn filter_min_size_uses_physical_volume() {
        // 5 voxels at spacing (1, 1, 1.2) occupy 6 mm³, above a 5 mm³ floor.
        let mut bools = vec![false; 5];
        bools.iter_mut().for_each(|b| *b = true);
        let m = BinaryMask::from_bools((5, 1, 1), (1.0, 1.0, 1.2), &bools).unwrap();
        let ls = label_components(&m, Connectivity::Six);
        assert_eq!(filter_min_size(&ls, 5.0).unwrap().len(), 1);
    }

    #[test]
    fn filter_min_size_rejects_negative() {
        let ls = label_components(&mask((1, 1, 1), &[]), Connectivity::Six);
        assert_eq!(filter_min_size(&ls, -1.0).unwrap_err().code(), "invalid-size");
    }

    #[test]
    fn to_mask_round_trips_labeling() {
        let m = mask((4, 3, 2), &[(0, 0, 0), (1, 0, 0), (3, 2, 1), (2, 2, 0)]);
        let ls = label_components(&m, Connectivity::TwentySix);
        assert_eq!(to_mask(&ls), m);
    }

    #[test]
    fn to_mask_of_empty_set_is_all_zero() {
        let ls = label_components(&mask((2, 2, 2), &[]), Connectivity::Six);
        assert_eq!(to_mask(&ls).count_positive(), 0);
    }

    #[test]
    fn filtered_mask_positive_count_matches_voxel_sum() {
        let m = mask(
            (10, 1, 1),
            &[(0, 0, 0), (1, 0, 0), (2, 0, 0), (5, 0, 0), (8, 0, 0), (9, 0, 0)],
        );
        let ls = label_components(&m, Connectivity::Six);
        let filtered = filter_min_size(&ls, 2.0).unwrap();
        assert_eq!(to_mask(&filtered).count_positive(), filtered.total_voxels());
    }
}
