//! 3-D scalar grids with physical voxel spacing.
//!
//! [`Volume`] is the carrier for everything voxel-shaped in this crate:
//! image intensities, probability maps, and binary masks. Data is stored
//! flat in x-fastest order (`x + nx·(y + ny·z)`), spacing is millimetres
//! per voxel along each axis, and the scalar type is one of `uint8`,
//! `int16`, or `float32`.
//!
//! [`BinaryMask`] and [`ProbabilityMap`] are validated wrappers: once
//! constructed, a mask is guaranteed to hold only {0, 1} and a probability
//! map only finite values in [0, 1]. Constructing them is the single
//! checkpoint where those invariants are enforced, which lets every
//! downstream consumer (labeling, metrics, thresholds) skip re-validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type of a volume's payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "uint8")]
    U8,
    #[serde(rename = "int16")]
    I16,
    #[serde(rename = "float32")]
    F32,
}

impl Dtype {
    /// Payload bytes per voxel.
    pub fn bytes_per_voxel(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I16 => 2,
            Dtype::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "uint8",
            Dtype::I16 => "int16",
            Dtype::F32 => "float32",
        }
    }
}

/// Flat voxel payload, one variant per supported scalar type.
///
/// Keeping the native representation (rather than widening everything to
/// `f32`) makes file round-trips bit-identical for all three types.
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            VoxelData::U8(_) => Dtype::U8,
            VoxelData::I16(_) => Dtype::I16,
            VoxelData::F32(_) => Dtype::F32,
        }
    }
}

/// A 3-D scalar grid with per-axis physical spacing in millimetres.
///
/// Immutable after construction; cheap to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    data: VoxelData,
}

impl Volume {
    /// Builds a volume, enforcing the grid invariants.
    ///
    /// # Errors
    ///
    /// `invariant-violation` if any dimension is zero, any spacing
    /// component is non-positive or non-finite, or the payload length does
    /// not equal `nx·ny·nz`.
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        data: VoxelData,
    ) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvariantViolation(format!(
                "dimensions must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        for (axis, s) in [("x", spacing.0), ("y", spacing.1), ("z", spacing.2)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvariantViolation(format!(
                    "spacing along {axis} must be positive and finite, got {s}"
                )));
            }
        }
        let expected = nx
            .checked_mul(ny)
            .and_then(|p| p.checked_mul(nz))
            .ok_or_else(|| {
                Error::InvariantViolation(format!("dimensions {nx}x{ny}x{nz} overflow"))
            })?;
        if data.len() != expected {
            return Err(Error::InvariantViolation(format!(
                "payload holds {} voxels but dimensions {nx}x{ny}x{nz} require {expected}",
                data.len()
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            data,
        })
    }

    pub fn from_f32(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        data: Vec<f32>,
    ) -> Result<Self> {
        Volume::new(dims, spacing, VoxelData::F32(data))
    }

    pub fn from_u8(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        data: Vec<u8>,
    ) -> Result<Self> {
        Volume::new(dims, spacing, VoxelData::U8(data))
    }

    pub fn from_i16(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        data: Vec<i16>,
    ) -> Result<Self> {
        Volume::new(dims, spacing, VoxelData::I16(data))
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.spacing
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    /// Number of voxels (`nx·ny·nz`).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Physical volume of one voxel in mm³. Strictly positive by
    /// construction.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.0 as f64 * self.spacing.1 as f64 * self.spacing.2 as f64
    }

    /// Linear index of voxel `(x, y, z)` under x-fastest ordering.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims.0 && y < self.dims.1 && z < self.dims.2);
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    /// Inverse of [`Volume::index`].
    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let (nx, ny, _) = self.dims;
        (i % nx, (i / nx) % ny, i / (nx * ny))
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.dims.0
            && (y as usize) < self.dims.1
            && (z as usize) < self.dims.2
    }

    /// Voxel value at linear index `i`, widened to `f64`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        match &self.data {
            VoxelData::U8(v) => v[i] as f64,
            VoxelData::I16(v) => v[i] as f64,
            VoxelData::F32(v) => v[i] as f64,
        }
    }

    #[inline]
    pub fn value_at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.value(self.index(x, y, z))
    }

    /// Borrows the payload as `f32` when that is the native type.
    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            VoxelData::F32(v) => Some(v),
            _ => None,
        }
    }

    /// The payload widened to an owned `f32` vector.
    pub fn to_f32_vec(&self) -> Vec<f32> {
        match &self.data {
            VoxelData::U8(v) => v.iter().map(|&x| x as f32).collect(),
            VoxelData::I16(v) => v.iter().map(|&x| x as f32).collect(),
            VoxelData::F32(v) => v.clone(),
        }
    }

    /// True when `other` lives on the same grid: identical dimensions and
    /// bit-identical spacing.
    pub fn same_grid(&self, other: &Volume) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    /// Human-readable description of how two grids differ, for
    /// `grid-mismatch` diagnostics.
    pub(crate) fn grid_diff(&self, other: &Volume) -> String {
        format!(
            "{}x{}x{} @ ({}, {}, {}) mm vs {}x{}x{} @ ({}, {}, {}) mm",
            self.dims.0,
            self.dims.1,
            self.dims.2,
            self.spacing.0,
            self.spacing.1,
            self.spacing.2,
            other.dims.0,
            other.dims.1,
            other.dims.2,
            other.spacing.0,
            other.spacing.1,
            other.spacing.2,
        )
    }
}

/// A volume whose voxels are exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask(Volume);

impl BinaryMask {
    /// Validates that every voxel is exactly 0 or 1.
    ///
    /// # Errors
    ///
    /// `invariant-violation` on the first out-of-range voxel.
    pub fn new(v: Volume) -> Result<Self> {
        let ok = match v.data() {
            VoxelData::U8(d) => d.iter().all(|&x| x <= 1),
            VoxelData::I16(d) => d.iter().all(|&x| x == 0 || x == 1),
            VoxelData::F32(d) => d.iter().all(|&x| x == 0.0 || x == 1.0),
        };
        if !ok {
            return Err(Error::InvariantViolation(
                "mask voxels must be exactly 0 or 1".into(),
            ));
        }
        Ok(BinaryMask(v))
    }

    /// Builds a `uint8` mask from a boolean vector.
    pub fn from_bools(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        bools: &[bool],
    ) -> Result<Self> {
        let data = bools.iter().map(|&b| b as u8).collect();
        Ok(BinaryMask(Volume::from_u8(dims, spacing, data)?))
    }

    pub fn volume(&self) -> &Volume {
        &self.0
    }

    pub fn into_volume(self) -> Volume {
        self.0
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.0.dims()
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.0.spacing()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        match self.0.data() {
            VoxelData::U8(d) => d[i] != 0,
            VoxelData::I16(d) => d[i] != 0,
            VoxelData::F32(d) => d[i] != 0.0,
        }
    }

    /// The mask as a boolean vector (one flag per voxel, x-fastest order).
    pub fn to_bools(&self) -> Vec<bool> {
        match self.0.data() {
            VoxelData::U8(d) => d.iter().map(|&x| x != 0).collect(),
            VoxelData::I16(d) => d.iter().map(|&x| x != 0).collect(),
            VoxelData::F32(d) => d.iter().map(|&x| x != 0.0).collect(),
        }
    }

    pub fn count_positive(&self) -> u64 {
        match self.0.data() {
            VoxelData::U8(d) => d.iter().filter(|&&x| x != 0).count() as u64,
            VoxelData::I16(d) => d.iter().filter(|&&x| x != 0).count() as u64,
            VoxelData::F32(d) => d.iter().filter(|&&x| x != 0.0).count() as u64,
        }
    }
}

/// A volume whose voxels are finite values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(Volume);

impl ProbabilityMap {
    /// Validates that every voxel is finite and within [0, 1]. NaN is
    /// rejected rather than propagated.
    ///
    /// # Errors
    ///
    /// `invariant-violation` on the first out-of-range or non-finite voxel.
    pub fn new(v: Volume) -> Result<Self> {
        let ok = match v.data() {
            VoxelData::U8(d) => d.iter().all(|&x| x <= 1),
            VoxelData::I16(d) => d.iter().all(|&x| x == 0 || x == 1),
            VoxelData::F32(d) => d.iter().all(|&x| x.is_finite() && (0.0..=1.0).contains(&x)),
        };
        if !ok {
            return Err(Error::InvariantViolation(
                "probability voxels must be finite and within [0, 1]".into(),
            ));
        }
        Ok(ProbabilityMap(v))
    }

    pub fn from_f32(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        data: Vec<f32>,
    ) -> Result<Self> {
        ProbabilityMap::new(Volume::from_f32(dims, spacing, data)?)
    }

    pub fn volume(&self) -> &Volume {
        &self.0
    }

    pub fn into_volume(self) -> Volume {
        self.0
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.0.dims()
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.0.spacing()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.0.value(i)
    }

    /// Thresholds the map into a binary mask: voxel = 1 iff `p > t`
    /// (strictly), so `t = 1` always yields the empty mask. Dims and
    /// spacing are preserved.
    ///
    /// # Errors
    ///
    /// `invalid-threshold` if `t` is NaN or outside [0, 1].
    pub fn binarize(&self, t: f64) -> Result<BinaryMask> {
        if !(t.is_finite() && (0.0..=1.0).contains(&t)) {
            return Err(Error::InvalidThreshold(t));
        }
        let n = self.len();
        let mut out = vec![0u8; n];
        for (i, flag) in out.iter_mut().enumerate() {
            if self.value(i) > t {
                *flag = 1;
            }
        }
        Ok(BinaryMask(Volume::from_u8(
            self.dims(),
            self.spacing(),
            out,
        )?))
    }
}
