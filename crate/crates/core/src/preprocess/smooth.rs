use crate::error::{Error, Result};
use crate::volume::{Volume3D, Volume4D};

/// Kernel half-width in standard deviations.
const TRUNCATE_SIGMAS: f64 = 4.0;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Sampled Gaussian with standard deviation `sigma_vox` (in voxels), truncated
/// at `±ceil(4 sigma)` and normalized to sum 1. Index `radius` is the centre.
pub fn gaussian_kernel(sigma_vox: f64) -> Vec<f64> {
    let radius = (TRUNCATE_SIGMAS * sigma_vox).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma_vox * sigma_vox)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

fn axis_kernels(fwhm_mm: f64, voxel_mm: [f64; 3]) -> Result<[Vec<f64>; 3]> {
    if !(fwhm_mm > 0.0 && fwhm_mm.is_finite()) {
        return Err(Error::Config(format!("FWHM must be positive, got {fwhm_mm}")));
    }
    let sigma_mm = fwhm_to_sigma(fwhm_mm);
    Ok(voxel_mm.map(|v| gaussian_kernel(sigma_mm / v)))
}

/// Convolves one grid along one axis with replicate-edge padding.
fn convolve_axis(src: &[f64], dst: &mut [f64], dims: [usize; 3], axis: usize, kernel: &[f64]) {
    let radius = (kernel.len() / 2) as isize;
    let n = dims[axis] as isize;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut line = vec![0.0; dims[axis]];
    let (outer_a, outer_b) = match axis {
        0 => (dims[1], dims[2]),
        1 => (dims[0], dims[2]),
        _ => (dims[0], dims[1]),
    };
    for b in 0..outer_b {
        for a in 0..outer_a {
            let base = match axis {
                0 => dims[0] * (a + dims[1] * b),
                1 => a + dims[0] * dims[1] * b,
                _ => a + dims[0] * b,
            };
            for (i, l) in line.iter_mut().enumerate() {
                *l = src[base + i * stride];
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, w) in kernel.iter().enumerate() {
                    let p = (i + j as isize - radius).clamp(0, n - 1);
                    acc += w * line[p as usize];
                }
                dst[base + i as usize * stride] = acc;
            }
        }
    }
}

fn smooth_grid(data: &mut [f64], dims: [usize; 3], kernels: &[Vec<f64>; 3]) {
    let mut tmp = vec![0.0; data.len()];
    for (axis, k) in kernels.iter().enumerate() {
        if k.len() == 1 {
            continue;
        }
        convolve_axis(data, &mut tmp, dims, axis, k);
        data.copy_from_slice(&tmp);
    }
}

/// Separable 3D Gaussian smoothing specified by FWHM in millimetres.
pub trait GaussianSmooth: Sized {
    fn gaussian_smooth(&self, fwhm_mm: f64) -> Result<Self>;
}

impl GaussianSmooth for Volume3D {
    fn gaussian_smooth(&self, fwhm_mm: f64) -> Result<Self> {
        let kernels = axis_kernels(fwhm_mm, self.voxel_mm())?;
        let mut out = self.clone();
        smooth_grid(out.data_mut(), self.dims(), &kernels);
        Ok(out)
    }
}

impl GaussianSmooth for Volume4D {
    /// Smooths each frame independently.
    fn gaussian_smooth(&self, fwhm_mm: f64) -> Result<Self> {
        let kernels = axis_kernels(fwhm_mm, self.voxel_mm())?;
        let dims = self.spatial_dims();
        let n = self.frame_len();
        let mut out = self.clone();
        for frame in out.data_mut().chunks_exact_mut(n) {
            smooth_grid(frame, dims, &kernels);
        }
        Ok(out)
    }
}

pub fn gaussian_smooth<V: GaussianSmooth>(vol: &V, fwhm_mm: f64) -> Result<V> {
    vol.gaussian_smooth(fwhm_mm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_for_8mm_on_3mm_grid() {
        let s = fwhm_to_sigma(8.0);
        assert!((s - 3.3973).abs() < 1e-4);
        assert!((s / 3.0 - 1.1324).abs() < 1e-4);
    }

    #[test]
    fn kernel_normalized_and_truncated() {
        let k = gaussian_kernel(1.1324);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(k[5] > k[4] && k[4] == k[6]);
    }

    #[test]
    fn constant_preserved() {
        let v = Volume3D::filled([7, 5, 6], [3.0; 3], 12_692.0).unwrap();
        let s = gaussian_smooth(&v, 8.0).unwrap();
        assert!(s.data().iter().all(|x| (x - 12_692.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_non_positive_fwhm() {
        let v = Volume3D::filled([2, 2, 2], [3.0; 3], 1.0).unwrap();
        assert!(matches!(gaussian_smooth(&v, 0.0), Err(Error::Config(_))));
        assert!(matches!(gaussian_smooth(&v, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn four_d_smooths_each_frame() {
        let mut data = vec![0.0; 2 * 125];
        data[62] = 1.0;
        data[125 + 62] = 2.0;
        let v = Volume4D::new([5, 5, 5, 2], [3.0; 3], 2.0, data).unwrap();
        let s = gaussian_smooth(&v, 6.0).unwrap();
        for (a, b) in s.frame(0).iter().zip(s.frame(1)) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
    }
}
