//! Lossless binary volume format.
//!
//! Layout (all little-endian):
//!
//! | offset | size   | field                              |
//! |--------|--------|------------------------------------|
//! | 0      | 4      | magic `HFCV`                       |
//! | 4      | 1      | version (currently 1)              |
//! | 5      | 32     | dims `nx, ny, nz, nt` as `u64`     |
//! | 37     | 24     | voxel size in mm as `f64` x 3      |
//! | 61     | 8      | repetition time in seconds (`f64`) |
//! | 69     | 8 * n  | voxel values as `f64`, x fastest   |

use std::path::Path;

use super::Volume4D;
use crate::error::{Error, Result};

pub const INTERNAL_MAGIC: &[u8; 4] = b"HFCV";
pub const INTERNAL_VERSION: u8 = 1;
const HEADER_LEN: usize = 69;

pub fn write_internal(vol: &Volume4D, path: &Path) -> Result<()> {
    std::fs::write(path, encode_internal(vol)).map_err(|e| Error::io(path, e))
}

pub fn read_internal(path: &Path) -> Result<Volume4D> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_internal(&bytes)
}

pub(crate) fn encode_internal(vol: &Volume4D) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * vol.data().len());
    out.extend_from_slice(INTERNAL_MAGIC);
    out.push(INTERNAL_VERSION);
    for d in vol.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in vol.voxel_mm() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&vol.tr_seconds().to_le_bytes());
    for v in vol.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode_internal(bytes: &[u8]) -> Result<Volume4D> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[0..4] != INTERNAL_MAGIC {
        return Err(Error::parse("magic", "not an internal-format volume"));
    }
    if bytes[4] != INTERNAL_VERSION {
        return Err(Error::Version {
            expected: INTERNAL_VERSION,
            found: bytes[4],
        });
    }
    let u64_at = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());

    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = usize::try_from(u64_at(5 + 8 * i))
            .map_err(|_| Error::parse(format!("dims[{i}]"), "does not fit in memory"))?;
    }
    let voxel_mm = [f64_at(37), f64_at(45), f64_at(53)];
    let tr = f64_at(61);

    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::parse("dims", "voxel count overflows"))?;
    let expected = HEADER_LEN + n;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..expected]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Volume4D::new(dims, voxel_mm, tr, data)
}
