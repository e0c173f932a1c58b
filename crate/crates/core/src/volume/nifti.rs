//! Minimal NIfTI-1 support: single-file (`n+1`) and header/image pair (`ni1`)
//! storage, datatypes 4 (int16) and 16 (float32), either byte order.
//! Orientation fields (qform/sform) are ignored.

use std::path::Path;

use super::Volume4D;
use crate::error::{Error, Result};

pub const NIFTI_HEADER_SIZE: usize = 348;

const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;
const WRITE_VOX_OFFSET: usize = 352;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ByteOrder {
    Little,
    Big,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    order: ByteOrder,
}

impl HeaderReader<'_> {
    fn i16_at(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        match self.order {
            ByteOrder::Little => i16::from_le_bytes(b),
            ByteOrder::Big => i16::from_be_bytes(b),
        }
    }

    fn f32_at(&self, off: usize) -> f32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().unwrap();
        match self.order {
            ByteOrder::Little => f32::from_le_bytes(b),
            ByteOrder::Big => f32::from_be_bytes(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Storage {
    SingleFile,
    Pair,
}

struct Header {
    order: ByteOrder,
    storage: Storage,
    dims: [usize; 4],
    datatype: i16,
    voxel_mm: [f64; 3],
    tr_seconds: f64,
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < NIFTI_HEADER_SIZE {
        return Err(Error::Truncated {
            expected: NIFTI_HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let raw: [u8; 4] = bytes[0..4].try_into().unwrap();
    let order = if i32::from_le_bytes(raw) == NIFTI_HEADER_SIZE as i32 {
        ByteOrder::Little
    } else if i32::from_be_bytes(raw) == NIFTI_HEADER_SIZE as i32 {
        ByteOrder::Big
    } else {
        return Err(Error::parse(
            "sizeof_hdr",
            format!("expected 348 in either byte order, got {}", i32::from_le_bytes(raw)),
        ));
    };
    let r = HeaderReader { bytes, order };

    let magic = &bytes[344..348];
    let storage = match magic {
        b"n+1\0" => Storage::SingleFile,
        b"ni1\0" => Storage::Pair,
        _ => {
            return Err(Error::parse(
                "magic",
                format!("bad magic {:?}", String::from_utf8_lossy(magic)),
            ))
        }
    };

    let ndim = r.i16_at(40);
    if ndim != 3 && ndim != 4 {
        return Err(Error::parse("dim[0]", format!("expected 3 or 4 dimensions, got {ndim}")));
    }
    let mut dims = [1usize; 4];
    for (i, d) in dims.iter_mut().enumerate().take(ndim as usize) {
        let v = r.i16_at(42 + 2 * i);
        if v <= 0 {
            return Err(Error::parse(format!("dim[{}]", i + 1), format!("non-positive size {v}")));
        }
        *d = v as usize;
    }

    let datatype = r.i16_at(70);
    let expected_bitpix = match datatype {
        DT_INT16 => 16,
        DT_FLOAT32 => 32,
        other => {
            return Err(Error::parse(
                "datatype",
                format!("unsupported datatype code {other} (only 4 and 16)"),
            ))
        }
    };
    let bitpix = r.i16_at(72);
    if bitpix != expected_bitpix {
        return Err(Error::parse(
            "bitpix",
            format!("{bitpix} does not match datatype {datatype}"),
        ));
    }

    let mut voxel_mm = [0.0; 3];
    for (i, v) in voxel_mm.iter_mut().enumerate() {
        let p = r.f32_at(80 + 4 * i);
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::parse(format!("pixdim[{}]", i + 1), format!("non-positive spacing {p}")));
        }
        *v = p as f64;
    }
    let tr_seconds = if ndim == 4 {
        let p = r.f32_at(92);
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::parse("pixdim[4]", format!("non-positive repetition time {p}")));
        }
        p as f64
    } else {
        1.0
    };

    let vox_offset = r.f32_at(108);
    if !(vox_offset >= 0.0 && vox_offset.is_finite()) || vox_offset.fract() != 0.0 {
        return Err(Error::parse("vox_offset", format!("invalid offset {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    if storage == Storage::SingleFile && vox_offset < NIFTI_HEADER_SIZE {
        return Err(Error::parse(
            "vox_offset",
            format!("{vox_offset} lies inside the header"),
        ));
    }

    Ok(Header {
        order,
        storage,
        dims,
        datatype,
        voxel_mm,
        tr_seconds,
        vox_offset,
        scl_slope: r.f32_at(112),
        scl_inter: r.f32_at(116),
    })
}

fn decode_payload(h: &Header, payload: &[u8], offset: usize) -> Result<Volume4D> {
    let n: usize = h.dims.iter().product();
    let width = if h.datatype == DT_INT16 { 2 } else { 4 };
    let needed = offset + n * width;
    if payload.len() < needed {
        return Err(Error::Truncated {
            expected: needed,
            found: payload.len(),
        });
    }
    let body = &payload[offset..needed];
    let scale = h.scl_slope != 0.0 && h.scl_slope.is_finite();
    let (slope, inter) = (h.scl_slope as f64, h.scl_inter as f64);

    let data: Vec<f64> = match h.datatype {
        DT_INT16 => body
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                let v = match h.order {
                    ByteOrder::Little => i16::from_le_bytes(b),
                    ByteOrder::Big => i16::from_be_bytes(b),
                };
                v as f64
            })
            .collect(),
        _ => body
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                let v = match h.order {
                    ByteOrder::Little => f32::from_le_bytes(b),
                    ByteOrder::Big => f32::from_be_bytes(b),
                };
                v as f64
            })
            .collect(),
    };
    let data = if scale {
        data.into_iter().map(|v| v * slope + inter).collect()
    } else {
        data
    };
    Volume4D::new(h.dims, h.voxel_mm, h.tr_seconds, data)
}

/// Decodes a single-file (`n+1`) image held in memory.
pub(crate) fn decode_nifti(bytes: &[u8]) -> Result<Volume4D> {
    let h = parse_header(bytes)?;
    if h.storage == Storage::Pair {
        return Err(Error::parse(
            "magic",
            "ni1 header requires a separate .img file; use read_nifti with a path",
        ));
    }
    decode_payload(&h, bytes, h.vox_offset)
}

/// Reads a `.nii` file, or a `.hdr`/`.img` pair when the header magic is `ni1`.
pub fn read_nifti(path: &Path) -> Result<Volume4D> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let h = parse_header(&bytes)?;
    match h.storage {
        Storage::SingleFile => decode_payload(&h, &bytes, h.vox_offset),
        Storage::Pair => {
            let img = path.with_extension("img");
            let payload = std::fs::read(&img).map_err(|e| Error::io(&img, e))?;
            decode_payload(&h, &payload, h.vox_offset)
        }
    }
}

/// Writes a little-endian single-file float32 image. Values are rounded to
/// single precision.
pub fn write_nifti(vol: &Volume4D, path: &Path) -> Result<()> {
    let bytes = encode_nifti(vol)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_nifti(vol: &Volume4D) -> Result<Vec<u8>> {
    let dims = vol.dims();
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Shape(format!("dimensions {dims:?} exceed the int16 header range")));
    }
    let mut hdr = vec![0u8; WRITE_VOX_OFFSET];
    let put_i16 = |buf: &mut [u8], off: usize, v: i16| buf[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |buf: &mut [u8], off: usize, v: f32| buf[off..off + 4].copy_from_slice(&v.to_le_bytes());

    hdr[0..4].copy_from_slice(&(NIFTI_HEADER_SIZE as i32).to_le_bytes());
    let ndim: i16 = if dims[3] > 1 { 4 } else { 3 };
    put_i16(&mut hdr, 40, ndim);
    for (i, &d) in dims.iter().enumerate() {
        put_i16(&mut hdr, 42 + 2 * i, d as i16);
    }
    for i in 4..7 {
        put_i16(&mut hdr, 42 + 2 * i, 1);
    }
    put_i16(&mut hdr, 70, DT_FLOAT32);
    put_i16(&mut hdr, 72, 32);
    put_f32(&mut hdr, 76, 1.0);
    let vmm = vol.voxel_mm();
    for (i, &v) in vmm.iter().enumerate() {
        put_f32(&mut hdr, 80 + 4 * i, v as f32);
    }
    put_f32(&mut hdr, 92, vol.tr_seconds() as f32);
    put_f32(&mut hdr, 108, WRITE_VOX_OFFSET as f32);
    // scl_slope = 0: no scaling
    hdr[123] = 2 | 8; // mm, seconds
    hdr[344..348].copy_from_slice(b"n+1\0");

    let mut out = hdr;
    out.reserve(vol.data().len() * 4);
    for &v in vol.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int16_header(big_endian: bool, magic: &[u8; 4], datatype: i16, dims: [i16; 4], slope: f32) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        let i32b = |v: i32| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        let i16b = |v: i16| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        let f32b = |v: f32| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        h[0..4].copy_from_slice(&i32b(348));
        h[40..42].copy_from_slice(&i16b(4));
        for (i, d) in dims.iter().enumerate() {
            h[42 + 2 * i..44 + 2 * i].copy_from_slice(&i16b(*d));
        }
        h[70..72].copy_from_slice(&i16b(datatype));
        h[72..74].copy_from_slice(&i16b(if datatype == 16 { 32 } else { 16 }));
        for i in 0..3 {
            h[80 + 4 * i..84 + 4 * i].copy_from_slice(&f32b(3.0));
        }
        h[92..96].copy_from_slice(&f32b(2.2));
        h[108..112].copy_from_slice(&f32b(352.0));
        h[112..116].copy_from_slice(&f32b(slope));
        h[116..120].copy_from_slice(&f32b(100.0));
        h[344..348].copy_from_slice(magic);
        h
    }

    #[test]
    fn int16_unscaled_when_slope_zero() {
        for big in [false, true] {
            let mut bytes = int16_header(big, b"n+1\0", 4, [2, 2, 2, 2], 0.0);
            for v in 0..16i16 {
                let b = if big { (v - 8).to_be_bytes() } else { (v - 8).to_le_bytes() };
                bytes.extend_from_slice(&b);
            }
            let vol = decode_nifti(&bytes).unwrap();
            assert_eq!(vol.dims(), [2, 2, 2, 2]);
            assert_eq!(vol.voxel_mm(), [3.0; 3]);
            assert!((vol.tr_seconds() - 2.2).abs() < 1e-6);
            let expect: Vec<f64> = (0..16).map(|v| (v - 8) as f64).collect();
            assert_eq!(vol.data(), &expect[..]);
        }
    }

    #[test]
    fn scaling_applied_when_slope_nonzero() {
        let mut bytes = int16_header(false, b"n+1\0", 4, [1, 1, 1, 2], 2.0);
        bytes.extend_from_slice(&3i16.to_le_bytes());
        bytes.extend_from_slice(&(-1i16).to_le_bytes());
        let vol = decode_nifti(&bytes).unwrap();
        assert_eq!(vol.data(), &[106.0, 98.0]);
    }

    #[test]
    fn distinct_errors() {
        let bytes = int16_header(false, b"XXX\0", 4, [1, 1, 1, 1], 0.0);
        match decode_nifti(&bytes) {
            Err(Error::Parse { field, message }) => {
                assert_eq!(field, "magic");
                assert!(message.contains("bad magic"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let bytes = int16_header(false, b"n+1\0", 2, [1, 1, 1, 1], 0.0);
        assert!(matches!(decode_nifti(&bytes), Err(Error::Parse { field, .. }) if field == "datatype"));

        let mut bytes = int16_header(false, b"n+1\0", 4, [2, 2, 2, 2], 0.0);
        bytes.extend_from_slice(&[0u8; 10]);
        assert!(matches!(decode_nifti(&bytes), Err(Error::Truncated { expected: 384, found: 362 })));

        let bytes = int16_header(false, b"n+1\0", 4, [2, 0, 2, 2], 0.0);
        assert!(matches!(decode_nifti(&bytes), Err(Error::Parse { field, .. }) if field == "dim[2]"));

        assert!(matches!(decode_nifti(&[0u8; 20]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn float32_export_round_trip() {
        let data: Vec<f64> = (0..60).map(|i| (i as f64) * 0.123_456_789 - 3.0).collect();
        let vol = Volume4D::new([3, 4, 5, 1], [3.0, 3.0, 3.5], 1.0, data).unwrap();
        let back = decode_nifti(&encode_nifti(&vol).unwrap()).unwrap();
        assert_eq!(back.dims(), vol.dims());
        for (a, b) in vol.data().iter().zip(back.data()) {
            assert_eq!(*b, (*a as f32) as f64);
        }
    }
}
