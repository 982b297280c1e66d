//! Volume file I/O: a NIfTI-1 subset and a portable raw format.
//!
//! Two on-disk representations are supported, auto-detected on read:
//!
//! * **NIfTI-1**, restricted to uncompressed single-file images with a
//!   348-byte header and scalar type `uint8`, `int16`, or `float32`.
//!   Consumed header fields: `sizeof_hdr` (endianness detection), `dim`,
//!   `datatype`, `bitpix`, `pixdim`, `vox_offset`, and `magic` (`n+1\0`).
//!   Orientation, affines, and intensity scaling are deliberately ignored:
//!   evaluation needs physical voxel volume, not anatomical orientation.
//!   Both byte orders are read; files are always written little-endian.
//!
//! * **Raw**: a single JSON header line
//!   `{"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"dtype":"float32"}`
//!   terminated by `\n`, followed by the little-endian voxel payload.
//!   Trivially inspectable and fully deterministic, which makes it the
//!   format of choice for tests and synthetic cohorts.
//!
//! Voxel order is x-fastest in both formats (NIfTI's native order), so no
//! reordering happens on either path. Writes go through a sibling
//! temp-file-and-rename so readers never observe a half-written volume.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dtype, VoxelData, Volume};

/// On-disk format selector for [`write_volume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti,
    Raw,
}

const NIFTI_HEADER_LEN: usize = 348;
/// Written `vox_offset`: header plus the 4-byte zero extender.
const NIFTI_DATA_OFFSET: usize = 352;
const NIFTI_MAGIC: &[u8; 4] = b"n+1\0";

/// Byte offsets of the consumed NIfTI-1 header fields.
mod offset {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const XYZT_UNITS: usize = 123;
    pub const MAGIC: usize = 344;
}

/// NIfTI-1 datatype codes for the supported scalar types.
mod datatype_code {
    pub const UINT8: i16 = 2;
    pub const INT16: i16 = 4;
    pub const FLOAT32: i16 = 16;
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    dims: [usize; 3],
    spacing: [f32; 3],
    dtype: String,
}

/// Reads a volume from `path`, auto-detecting the format: files starting
/// with `{` are parsed as raw, everything else as NIfTI-1.
///
/// # Errors
///
/// * `io-error` — the file cannot be read.
/// * `unsupported-dtype` — scalar type outside {uint8, int16, float32}.
/// * `invalid-header` — parseable but invalid header (bad magic, bad
///   sizeof_hdr, non-positive dims or spacing, 4-D shape, bitpix
///   contradiction, bad vox_offset).
/// * `corrupt-file` — structurally broken file (empty, truncated header
///   line, payload shorter than the header promises).
pub fn read_volume<P: AsRef<Path>>(path: P) -> Result<Volume> {
    let bytes = fs::read(path.as_ref())?;
    match bytes.first() {
        None => Err(Error::CorruptFile("file is empty".into())),
        Some(b'{') => read_raw(&bytes),
        Some(_) => read_nifti(&bytes),
    }
}

/// Writes `v` to `path` in the requested format.
///
/// The write is atomic (temp file + rename), and a subsequent
/// [`read_volume`] reproduces dims, spacing, and payload exactly.
///
/// # Errors
///
/// `io-error` if the path is unwritable; `invalid-header` if the
/// dimensions cannot be represented in a NIfTI-1 header (axes larger than
/// 32767).
pub fn write_volume<P: AsRef<Path>>(v: &Volume, path: P, format: VolumeFormat) -> Result<()> {
    let bytes = match format {
        VolumeFormat::Nifti => encode_nifti(v)?,
        VolumeFormat::Raw => encode_raw(v),
    };
    write_atomic(path.as_ref(), &bytes)
}

/// Serializes a volume without touching the filesystem. Exposed so
/// callers that embed volumes elsewhere (checksums, fixtures) share the
/// exact on-disk encoding.
pub fn encode_volume(v: &Volume, format: VolumeFormat) -> Result<Vec<u8>> {
    match format {
        VolumeFormat::Nifti => encode_nifti(v),
        VolumeFormat::Raw => Ok(encode_raw(v)),
    }
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = Path::new(&tmp_name);
    fs::write(tmp, bytes)?;
    fs::rename(tmp, path).map_err(|e| {
        let _ = fs::remove_file(tmp);
        Error::from(e)
    })
}

// ---------------------------------------------------------------------------
// Raw format
// ---------------------------------------------------------------------------

fn read_raw(bytes: &[u8]) -> Result<Volume> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptFile("raw header line is not terminated".into()))?;
    let header: RawHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::CorruptFile(format!("raw header is not valid JSON: {e}")))?;

    let dtype = match header.dtype.as_str() {
        "uint8" => Dtype::U8,
        "int16" => Dtype::I16,
        "float32" => Dtype::F32,
        other => return Err(Error::UnsupportedDtype(format!("raw dtype `{other}`"))),
    };
    let [nx, ny, nz] = header.dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidHeader(format!(
            "raw dims must be positive, got [{nx}, {ny}, {nz}]"
        )));
    }
    for s in header.spacing {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidHeader(format!(
                "raw spacing must be positive and finite, got {s}"
            )));
        }
    }

    let n = nx
        .checked_mul(ny)
        .and_then(|p| p.checked_mul(nz))
        .ok_or_else(|| Error::InvalidHeader("raw dims overflow".into()))?;
    let payload = &bytes[newline + 1..];
    let expected = n * dtype.bytes_per_voxel();
    if payload.len() != expected {
        return Err(Error::CorruptFile(format!(
            "raw payload holds {} bytes but header promises {expected}",
            payload.len()
        )));
    }

    let data = decode_payload(payload, dtype, false);
    Volume::new(
        (nx, ny, nz),
        (header.spacing[0], header.spacing[1], header.spacing[2]),
        data,
    )
}

fn encode_raw(v: &Volume) -> Vec<u8> {
    let (nx, ny, nz) = v.dims();
    let (sx, sy, sz) = v.spacing();
    let header = RawHeader {
        dims: [nx, ny, nz],
        spacing: [sx, sy, sz],
        dtype: v.dtype().name().to_string(),
    };
    let mut bytes = serde_json::to_vec(&header).expect("raw header serialization cannot fail");
    bytes.push(b'\n');
    append_payload_le(&mut bytes, v.data());
    bytes
}

// ---------------------------------------------------------------------------
// NIfTI-1
// ---------------------------------------------------------------------------

fn read_nifti(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < NIFTI_HEADER_LEN {
        return Err(Error::CorruptFile(format!(
            "file holds {} bytes, shorter than the 348-byte NIfTI-1 header",
            bytes.len()
        )));
    }

    // sizeof_hdr doubles as the byte-order detector: it must read 348 in
    // exactly one of the two byte orders.
    let swapped = match i32::from_le_bytes(bytes[0..4].try_into().unwrap()) {
        348 => false,
        _ if i32::from_be_bytes(bytes[0..4].try_into().unwrap()) == 348 => true,
        other => {
            return Err(Error::InvalidHeader(format!(
                "sizeof_hdr is {other}, expected 348 in either byte order"
            )))
        }
    };

    let magic = &bytes[offset::MAGIC..offset::MAGIC + 4];
    if magic != NIFTI_MAGIC {
        return Err(Error::InvalidHeader(format!(
            "magic is {magic:?}, expected \"n+1\\0\" (single-file NIfTI-1)"
        )));
    }

    let read_i16 = |at: usize| -> i16 {
        let raw: [u8; 2] = bytes[at..at + 2].try_into().unwrap();
        if swapped {
            i16::from_be_bytes(raw)
        } else {
            i16::from_le_bytes(raw)
        }
    };
    let read_f32 = |at: usize| -> f32 {
        let raw: [u8; 4] = bytes[at..at + 4].try_into().unwrap();
        if swapped {
            f32::from_be_bytes(raw)
        } else {
            f32::from_le_bytes(raw)
        }
    };

    let ndim = read_i16(offset::DIM);
    if !(1..=7).contains(&ndim) {
        return Err(Error::InvalidHeader(format!(
            "dim[0] is {ndim}, expected 1..=7"
        )));
    }
    let ndim = ndim as usize;
    let dim = |axis: usize| read_i16(offset::DIM + 2 * axis);
    let mut dims = [1usize; 3];
    for axis in 1..=3.min(ndim) {
        let d = dim(axis);
        if d < 1 {
            return Err(Error::InvalidHeader(format!(
                "dim[{axis}] is {d}, expected >= 1"
            )));
        }
        dims[axis - 1] = d as usize;
    }
    for axis in 4..=ndim {
        if dim(axis) > 1 {
            return Err(Error::InvalidHeader(format!(
                "dim[{axis}] is {}; volumes with more than three dimensions are not supported",
                dim(axis)
            )));
        }
    }

    let datatype = read_i16(offset::DATATYPE);
    let dtype = match datatype {
        datatype_code::UINT8 => Dtype::U8,
        datatype_code::INT16 => Dtype::I16,
        datatype_code::FLOAT32 => Dtype::F32,
        other => {
            return Err(Error::UnsupportedDtype(format!(
                "NIfTI datatype code {other} (supported: 2 = uint8, 4 = int16, 16 = float32)"
            )))
        }
    };
    let bitpix = read_i16(offset::BITPIX);
    if bitpix as usize != dtype.bytes_per_voxel() * 8 {
        return Err(Error::InvalidHeader(format!(
            "bitpix {bitpix} contradicts datatype {datatype} ({} expects {})",
            dtype.name(),
            dtype.bytes_per_voxel() * 8
        )));
    }

    let mut spacing = [1.0f32; 3];
    for axis in 1..=3.min(ndim) {
        let s = read_f32(offset::PIXDIM + 4 * axis);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidHeader(format!(
                "pixdim[{axis}] is {s}, expected positive and finite"
            )));
        }
        spacing[axis - 1] = s;
    }

    let vox_offset = read_f32(offset::VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= NIFTI_HEADER_LEN as f32 && vox_offset.fract() == 0.0)
    {
        return Err(Error::InvalidHeader(format!(
            "vox_offset is {vox_offset}, expected an integral value >= 348"
        )));
    }
    let data_start = vox_offset as usize;

    let n = dims[0] * dims[1] * dims[2];
    let payload_len = n * dtype.bytes_per_voxel();
    let available = bytes.len().saturating_sub(data_start);
    if available < payload_len {
        return Err(Error::CorruptFile(format!(
            "payload holds {available} bytes from offset {data_start}, but {}x{}x{} {} requires {payload_len}",
            dims[0], dims[1], dims[2], dtype.name()
        )));
    }

    let data = decode_payload(&bytes[data_start..data_start + payload_len], dtype, swapped);
    Volume::new(
        (dims[0], dims[1], dims[2]),
        (spacing[0], spacing[1], spacing[2]),
        data,
    )
}

fn encode_nifti(v: &Volume) -> Result<Vec<u8>> {
    let (nx, ny, nz) = v.dims();
    for (axis, d) in [("x", nx), ("y", ny), ("z", nz)] {
        if d > i16::MAX as usize {
            return Err(Error::InvalidHeader(format!(
                "dimension {axis} = {d} cannot be represented in a NIfTI-1 header (max 32767)"
            )));
        }
    }

    let mut bytes = vec![0u8; NIFTI_DATA_OFFSET];
    let put_i32 = |b: &mut [u8], at: usize, v: i32| b[at..at + 4].copy_from_slice(&v.to_le_bytes());
    let put_i16 = |b: &mut [u8], at: usize, v: i16| b[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |b: &mut [u8], at: usize, v: f32| b[at..at + 4].copy_from_slice(&v.to_le_bytes());

    put_i32(&mut bytes, offset::SIZEOF_HDR, NIFTI_HEADER_LEN as i32);
    put_i16(&mut bytes, offset::DIM, 3);
    put_i16(&mut bytes, offset::DIM + 2, nx as i16);
    put_i16(&mut bytes, offset::DIM + 4, ny as i16);
    put_i16(&mut bytes, offset::DIM + 6, nz as i16);
    for axis in 4..=7 {
        put_i16(&mut bytes, offset::DIM + 2 * axis, 1);
    }

    let datatype = match v.dtype() {
        Dtype::U8 => datatype_code::UINT8,
        Dtype::I16 => datatype_code::INT16,
        Dtype::F32 => datatype_code::FLOAT32,
    };
    put_i16(&mut bytes, offset::DATATYPE, datatype);
    put_i16(&mut bytes, offset::BITPIX, (v.dtype().bytes_per_voxel() * 8) as i16);

    let (sx, sy, sz) = v.spacing();
    put_f32(&mut bytes, offset::PIXDIM, 1.0); // qfac, conventionally 1
    put_f32(&mut bytes, offset::PIXDIM + 4, sx);
    put_f32(&mut bytes, offset::PIXDIM + 8, sy);
    put_f32(&mut bytes, offset::PIXDIM + 12, sz);

    put_f32(&mut bytes, offset::VOX_OFFSET, NIFTI_DATA_OFFSET as f32);
    bytes[offset::XYZT_UNITS] = 2; // NIFTI_UNITS_MM
    bytes[offset::MAGIC..offset::MAGIC + 4].copy_from_slice(NIFTI_MAGIC);

    append_payload_le(&mut bytes, v.data());
    Ok(bytes)
}

// ---------------------------------------------------------------------------
// Payload encoding
// ---------------------------------------------------------------------------

fn append_payload_le(out: &mut Vec<u8>, data: &VoxelData) {
    match data {
        VoxelData::U8(d) => out.extend_from_slice(d),
        VoxelData::I16(d) => {
            out.reserve(d.len() * 2);
            for x in d {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        VoxelData::F32(d) => {
            out.reserve(d.len() * 4);
            for x in d {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
}

/// Decodes a payload slice whose length already matches the voxel count.
fn decode_payload(payload: &[u8], dtype: Dtype, swapped: bool) -> VoxelData {
    match dtype {
        Dtype::U8 => VoxelData::U8(payload.to_vec()),
        Dtype::I16 => VoxelData::I16(
            payload
                .chunks_exact(2)
                .map(|c| {
                    let raw = [c[0], c[1]];
                    if swapped {
                        i16::from_be_bytes(raw)
                    } else {
                        i16::from_le_bytes(raw)
                    }
                })
                .collect(),
        ),
        Dtype::F32 => VoxelData::F32(
            payload
                .chunks_exact(4)
                .map(|c| {
                    let raw = [c[0], c[1], c[2], c[3]];
                    if swapped {
                        f32::from_be_bytes(raw)
                    } else {
                        f32::from_le_bytes(raw)
                    }
                })
                .collect(),
        ),
    }
}
