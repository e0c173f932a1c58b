//! Volume preprocessing: slice-timing correction, Gaussian smoothing,
//! time-averaging, normalized mutual information and cohort intensity
//! statistics.

mod cohort;
mod nmi;
mod smooth;

pub use cohort::{cohort_stats, CohortStats, Histogram, HistogramSpec};
pub use nmi::{nmi, DEFAULT_NMI_BINS};
pub use smooth::{fwhm_to_sigma, gaussian_kernel, gaussian_smooth, GaussianSmooth};

use crate::error::{Error, Result};
use crate::volume::{Axis, Volume3D, Volume4D};

/// Time shift applied to slice `k` (1-based) of `n_slices`, in seconds:
/// `(N/2 + 1 - k) * TR / N`, with `N/2` taken as a real number.
pub fn slice_shift_seconds(n_slices: usize, k: usize, tr_seconds: f64) -> f64 {
    let n = n_slices as f64;
    (n / 2.0 + 1.0 - k as f64) * tr_seconds / n
}

/// Samples `series` at fractional frame position `pos` by linear
/// interpolation, clamping to the first and last observation.
fn sample_linear(series: &[f64], pos: f64) -> f64 {
    let last = series.len() - 1;
    if pos <= 0.0 {
        return series[0];
    }
    if pos >= last as f64 {
        return series[last];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    let (a, b) = (series[i], series[i + 1]);
    // a + f*(b - a) keeps constant series exact
    a + frac * (b - a)
}

/// Resamples every slice along `slice_axis` to the acquisition time of the
/// middle slice.
pub fn slice_time_correct(vol: &Volume4D, slice_axis: Axis) -> Result<Volume4D> {
    let [nx, ny, nz, nt] = vol.dims();
    if nt < 2 {
        return Err(Error::InsufficientSamples(format!(
            "slice timing needs at least 2 frames, got {nt}"
        )));
    }
    let n_slices = [nx, ny, nz][slice_axis as usize];
    let tr = vol.tr_seconds();
    let mut out = vol.clone();
    let mut series = vec![0.0; nt];
    let stride = vol.frame_len();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let slice = [x, y, z][slice_axis as usize];
                let shift = slice_shift_seconds(n_slices, slice + 1, tr) / tr;
                if shift == 0.0 {
                    continue;
                }
                let base = vol.index(x, y, z, 0);
                for (t, s) in series.iter_mut().enumerate() {
                    *s = vol.data()[base + t * stride];
                }
                let dst = out.data_mut();
                for t in 0..nt {
                    dst[base + t * stride] = sample_linear(&series, t as f64 + shift);
                }
            }
        }
    }
    Ok(out)
}

/// Per-voxel arithmetic mean over frames.
pub fn time_average(vol: &Volume4D) -> Volume3D {
    let n = vol.frame_len();
    let nt = vol.nt();
    let mut acc = vec![0.0; n];
    for t in 0..nt {
        for (a, v) in acc.iter_mut().zip(vol.frame(t)) {
            *a += v;
        }
    }
    let inv = nt as f64;
    for a in &mut acc {
        *a /= inv;
    }
    Volume3D::new(vol.spatial_dims(), vol.voxel_mm(), acc).expect("mean of finite values")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_volume(n_slices: usize, nt: usize) -> Volume4D {
        let mut data = Vec::new();
        for t in 0..nt {
            for z in 0..n_slices {
                for i in 0..4 {
                    data.push((t * t) as f64 + (z * 10 + i) as f64);
                }
            }
        }
        Volume4D::new([2, 2, n_slices, nt], [3.0; 3], 2.2, data).unwrap()
    }

    #[test]
    fn shift_formula() {
        assert_eq!(slice_shift_seconds(36, 19, 2.2), 0.0);
        assert!((slice_shift_seconds(36, 1, 2.2) - 1.1).abs() < 1e-15);
        for k in 1..=36 {
            assert!(
                (slice_shift_seconds(36, k, 2.2) + slice_shift_seconds(36, 38 - k, 2.2)).abs() < 1e-12
            );
        }
        // odd slice counts have no zero-shift slice
        assert!((1..=5).all(|k| slice_shift_seconds(5, k, 2.0) != 0.0));
    }

    #[test]
    fn middle_slice_untouched_and_others_shifted() {
        let vol = ramp_volume(36, 6);
        let out = slice_time_correct(&vol, Axis::Z).unwrap();
        for t in 0..6 {
            for y in 0..2 {
                for x in 0..2 {
                    assert_eq!(out.get(x, y, 18, t).to_bits(), vol.get(x, y, 18, t).to_bits());
                }
            }
        }
        // slice k=1 is shifted forward by half a frame
        let expected = vol.get(0, 0, 0, 2) + 0.5 * (vol.get(0, 0, 0, 3) - vol.get(0, 0, 0, 2));
        assert_eq!(out.get(0, 0, 0, 2), expected);
        // last frame clamps
        assert_eq!(out.get(0, 0, 0, 5), vol.get(0, 0, 0, 5));
    }

    #[test]
    fn constant_series_invariant() {
        let vol = Volume4D::new([3, 3, 7, 5], [3.0; 3], 2.2, vec![0.1; 315]).unwrap();
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let out = slice_time_correct(&vol, axis).unwrap();
            assert_eq!(out, vol);
        }
    }

    #[test]
    fn slice_timing_needs_two_frames() {
        let vol = Volume4D::zeros([2, 2, 2, 1], [1.0; 3], 1.0).unwrap();
        assert!(matches!(
            slice_time_correct(&vol, Axis::Z),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn time_average_cases() {
        let single = Volume4D::new([2, 1, 1, 1], [1.0; 3], 1.0, vec![3.5, -1.0]).unwrap();
        assert_eq!(time_average(&single).data(), &[3.5, -1.0]);

        let v = [1.5, -2.0, 7.25];
        let mut data = v.to_vec();
        data.extend(v.iter().map(|x| -x));
        let sym = Volume4D::new([3, 1, 1, 2], [1.0; 3], 1.0, data).unwrap();
        assert!(time_average(&sym).data().iter().all(|&x| x == 0.0));
    }
}
