//! Scalar 3D/4D volumes and their on-disk formats.

mod internal;
mod nifti;

use std::path::Path;

pub use internal::{read_internal, write_internal, INTERNAL_MAGIC, INTERNAL_VERSION};
pub use nifti::{read_nifti, write_nifti, NIFTI_HEADER_SIZE};

use crate::error::{Error, Result};

/// Axis identifier for per-axis operations such as slice timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti,
    Internal,
}

/// A time series of `nt` scalar grids of `nx * ny * nz` voxels, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume4D {
    dims: [usize; 4],
    voxel_mm: [f64; 3],
    tr_seconds: f64,
    data: Vec<f64>,
}

/// A single scalar grid, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: [usize; 3],
    voxel_mm: [f64; 3],
    data: Vec<f64>,
}

fn check_geometry(dims: &[usize], voxel_mm: [f64; 3], len: usize) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::Shape(format!("dimensions must be positive, got {dims:?}")));
    }
    if voxel_mm.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!("voxel size must be positive, got {voxel_mm:?}")));
    }
    let expected: usize = dims.iter().product();
    if len != expected {
        return Err(Error::Shape(format!(
            "data length {len} does not match dimensions {dims:?} ({expected})"
        )));
    }
    Ok(())
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Shape(format!("non-finite value at flat index {i}"))),
        None => Ok(()),
    }
}

impl Volume4D {
    pub fn new(dims: [usize; 4], voxel_mm: [f64; 3], tr_seconds: f64, data: Vec<f64>) -> Result<Self> {
        check_geometry(&dims, voxel_mm, data.len())?;
        if !(tr_seconds > 0.0 && tr_seconds.is_finite()) {
            return Err(Error::Config(format!("repetition time must be positive, got {tr_seconds}")));
        }
        check_finite(&data)?;
        Ok(Volume4D {
            dims,
            voxel_mm,
            tr_seconds,
            data,
        })
    }

    pub fn zeros(dims: [usize; 4], voxel_mm: [f64; 3], tr_seconds: f64) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, voxel_mm, tr_seconds, vec![0.0; n])
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn spatial_dims(&self) -> [usize; 3] {
        [self.dims[0], self.dims[1], self.dims[2]]
    }

    pub fn nt(&self) -> usize {
        self.dims[3]
    }

    pub fn voxel_mm(&self) -> [f64; 3] {
        self.voxel_mm
    }

    pub fn tr_seconds(&self) -> f64 {
        self.tr_seconds
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frame_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize, t: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * (z + self.dims[2] * t))
    }

    pub fn get(&self, x: usize, y: usize, z: usize, t: usize) -> f64 {
        self.data[self.index(x, y, z, t)]
    }

    /// Time series of one voxel.
    pub fn series(&self, x: usize, y: usize, z: usize) -> Vec<f64> {
        let base = x + self.dims[0] * (y + self.dims[1] * z);
        let stride = self.frame_len();
        (0..self.nt()).map(|t| self.data[base + t * stride]).collect()
    }

    pub fn from_frames(frames: &[Volume3D], tr_seconds: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("no frames given".into()))?;
        let [nx, ny, nz] = first.dims;
        let mut data = Vec::with_capacity(first.data.len() * frames.len());
        for f in frames {
            if f.dims != first.dims {
                return Err(Error::Shape("frames have differing dimensions".into()));
            }
            data.extend_from_slice(&f.data);
        }
        Self::new([nx, ny, nz, frames.len()], first.voxel_mm, tr_seconds, data)
    }

    pub fn frame_volume(&self, t: usize) -> Volume3D {
        Volume3D {
            dims: self.spatial_dims(),
            voxel_mm: self.voxel_mm,
            data: self.frame(t).to_vec(),
        }
    }
}

impl Volume3D {
    pub fn new(dims: [usize; 3], voxel_mm: [f64; 3], data: Vec<f64>) -> Result<Self> {
        check_geometry(&dims, voxel_mm, data.len())?;
        check_finite(&data)?;
        Ok(Volume3D { dims, voxel_mm, data })
    }

    pub fn filled(dims: [usize; 3], voxel_mm: [f64; 3], value: f64) -> Result<Self> {
        Self::new(dims, voxel_mm, vec![value; dims.iter().product()])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_mm(&self) -> [f64; 3] {
        self.voxel_mm
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.dims[0] && y < self.dims[1] && z < self.dims[2]
    }

    pub fn into_4d(self, tr_seconds: f64) -> Result<Volume4D> {
        let [nx, ny, nz] = self.dims;
        Volume4D::new([nx, ny, nz, 1], self.voxel_mm, tr_seconds, self.data)
    }
}

pub fn write_volume(vol: &Volume4D, path: &Path, format: VolumeFormat) -> Result<()> {
    match format {
        VolumeFormat::Nifti => write_nifti(vol, path),
        VolumeFormat::Internal => write_internal(vol, path),
    }
}

/// Reads either format, dispatching on the leading magic bytes.
pub fn read_volume(path: &Path) -> Result<Volume4D> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(INTERNAL_MAGIC) {
        internal::decode_internal(&bytes)
    } else if bytes.len() < 4 {
        Err(Error::Truncated {
            expected: INTERNAL_MAGIC.len(),
            found: bytes.len(),
        })
    } else {
        nifti::decode_nifti(&bytes)
    }
}
