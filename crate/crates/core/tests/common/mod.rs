//! Naive reference implementations written straight from the definitions.
//! They share no code with the library beyond plain data accessors.

#![allow(dead_code)]

use hilbert_fc::features::{extract_segment, pearson_spatial, reho_pairwise, reho_region, GridEmbedding};
use hilbert_fc::hilbert::HilbertCurve;
use hilbert_fc::nn::{LayerKind, Model};
use hilbert_fc::preprocess::gaussian_smooth;
use hilbert_fc::volume::{Volume3D, Volume4D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

/// Mean of z-score products with sample standard deviations, two-pass.
pub fn pearson(v: &[f64], w: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = |a: &[f64]| a.iter().sum::<f64>() / n;
    let (mv, mw) = (mean(v), mean(w));
    let sd = |a: &[f64], m: f64| (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (sv, sw) = (sd(v, mv), sd(w, mw));
    let mut acc = 0.0;
    for i in 0..v.len() {
        acc += ((v[i] - mv) / sv) * ((w[i] - mw) / sw);
    }
    acc / (n - 1.0)
}

/// Mean of all N^2 ordered-pair time correlations, diagonal included.
pub fn reho(series: &[Vec<f64>]) -> f64 {
    let n = series.len();
    let mut total = 0.0;
    for a in series {
        for b in series {
            total += pearson(a, b);
        }
    }
    total / (n * n) as f64
}

pub fn time_average(vol: &Volume4D) -> Vec<f64> {
    let [nx, ny, nz, nt] = vol.dims();
    let mut out = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut s = 0.0;
                for t in 0..nt {
                    s += vol.get(x, y, z, t);
                }
                out.push(s / nt as f64);
            }
        }
    }
    out
}

/// Normalized Gaussian weights on `-r..=r`, `r = ceil(4 sigma)`.
pub fn gauss_weights(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

/// Full 3D weighted sum with edge replication (no separability).
pub fn smooth_dense(vol: &Volume3D, fwhm_mm: f64) -> Vec<f64> {
    let [nx, ny, nz] = vol.dims();
    let sigma_mm = fwhm_mm / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let vmm = vol.voxel_mm();
    let k: Vec<Vec<f64>> = (0..3).map(|a| gauss_weights(sigma_mm / vmm[a])).collect();
    let r: Vec<i64> = k.iter().map(|w| (w.len() / 2) as i64).collect();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut out = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                let mut acc = 0.0;
                for (c, wz) in k[2].iter().enumerate() {
                    let zz = clamp(z + c as i64 - r[2], nz);
                    for (b, wy) in k[1].iter().enumerate() {
                        let yy = clamp(y + b as i64 - r[1], ny);
                        for (a, wx) in k[0].iter().enumerate() {
                            let xx = clamp(x + a as i64 - r[0], nx);
                            acc += wx * wy * wz * vol.get(xx, yy, zz);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Forward pass with nested loops over the model's own weights.
pub fn forward_naive(model: &Model<f64>, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for layer in &model.layers {
        let [c, h, w] = layer.in_shape;
        x = match layer.kind {
            LayerKind::Conv3x3 { cin, cout } => {
                let k = &layer.param.as_ref().unwrap().value;
                let mut out = vec![0.0; cout * h * w];
                for o in 0..cout {
                    for yy in 0..h as i64 {
                        for xx in 0..w as i64 {
                            let mut acc = 0.0;
                            for ci in 0..cin {
                                for dy in -1i64..=1 {
                                    for dx in -1i64..=1 {
                                        let (sy, sx) = (yy + dy, xx + dx);
                                        if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                            continue;
                                        }
                                        let wi = ((o * cin + ci) * 3 + (dy + 1) as usize) * 3 + (dx + 1) as usize;
                                        acc += k[wi] * x[(ci * h + sy as usize) * w + sx as usize];
                                    }
                                }
                            }
                            out[(o * h + yy as usize) * w + xx as usize] = acc;
                        }
                    }
                }
                out
            }
            LayerKind::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerKind::MaxPool2 => {
                let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
                let mut out = vec![f64::NEG_INFINITY; c * oh * ow];
                for ci in 0..c {
                    for yy in 0..h {
                        for xx in 0..w {
                            let o = &mut out[(ci * oh + yy / 2) * ow + xx / 2];
                            *o = o.max(x[(ci * h + yy) * w + xx]);
                        }
                    }
                }
                out
            }
            LayerKind::Flatten => x,
            LayerKind::Dense { fan_in, fan_out } | LayerKind::Head { fan_in, fan_out } => {
                let wt = &layer.param.as_ref().unwrap().value;
                (0..fan_out)
                    .map(|o| (0..fan_in).map(|i| wt[o * fan_in + i] * x[i]).sum())
                    .collect()
            }
        };
    }
    x
}

/// Worst absolute deviation found over a batch of randomized trials.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleRun {
    pub trials: usize,
    pub max_abs_err: f64,
}

impl OracleRun {
    fn record(&mut self, a: f64, b: f64) {
        self.max_abs_err = self.max_abs_err.max((a - b).abs());
    }
}

pub fn random_volume(r: &mut ChaCha8Rng, dims: [usize; 4]) -> Volume4D {
    let n = dims.iter().product();
    let scale = r.random_range(0.1..5_000.0);
    let offset = r.random_range(-100.0..20_000.0);
    let data = (0..n).map(|_| offset + scale * r.random_range(-1.0..1.0)).collect();
    let vmm = [r.random_range(1.0..4.0), r.random_range(1.0..4.0), r.random_range(1.0..4.0)];
    Volume4D::new(dims, vmm, 2.0, data).unwrap()
}

pub fn oracle_pearson(trials: usize, seed: u64) -> OracleRun {
    let mut r = rng(seed);
    let mut run = OracleRun::default();
    for _ in 0..trials {
        let n = r.random_range(2..400);
        let scale = 10f64.powf(r.random_range(-3.0..4.0));
        let v = uniform_vec(&mut r, n, -scale, scale);
        let mut w = uniform_vec(&mut r, n, -scale, scale);
        // mix in a shared component so correlations span the whole range
        let mix = r.random_range(-1.0..1.0);
        for (a, b) in w.iter_mut().zip(&v) {
            *a += mix * 3.0 * b;
        }
        run.record(pearson_spatial(&v, &w).unwrap().value, pearson(&v, &w));
        run.trials += 1;
    }
    run
}

/// Checks both the pairwise matrix and the region mean.
pub fn oracle_reho(trials: usize, seed: u64) -> OracleRun {
    let mut r = rng(seed);
    let curve = HilbertCurve::new(3).unwrap();
    let emb = GridEmbedding { offset: [0; 3] };
    let mut run = OracleRun::default();
    for _ in 0..trials {
        let nt = r.random_range(2..24);
        let vol = random_volume(&mut r, [8, 8, 8, nt]);
        let half = r.random_range(0..8usize);
        let seed_index = r.random_range(half..curve.total_cells() - half);
        let seed_coord = curve.index_to_coord(seed_index).unwrap();
        let seg = extract_segment(&curve, 1, seed_coord, half).unwrap();
        let series: Vec<Vec<f64>> = (seed_index - half..=seed_index + half)
            .map(|h| {
                let [x, y, z] = curve.index_to_coord(h).unwrap();
                (0..nt).map(|t| vol.get(x, y, z, t)).collect()
            })
            .collect();
        let pc = reho_pairwise(&vol, &seg, &emb).unwrap();
        for k in 0..series.len() {
            for z in 0..series.len() {
                run.record(pc.get(k, z), pearson(&series[k], &series[z]));
            }
        }
        run.record(reho_region(&pc), reho(&series));
        run.trials += 1;
    }
    run
}

pub fn oracle_time_average(trials: usize, seed: u64) -> OracleRun {
    let mut r = rng(seed);
    let mut run = OracleRun::default();
    for _ in 0..trials {
        let dims = [r.random_range(1..7), r.random_range(1..7), r.random_range(1..7), r.random_range(1..30)];
        let vol = random_volume(&mut r, dims);
        let got = hilbert_fc::preprocess::time_average(&vol);
        for (a, b) in got.data().iter().zip(time_average(&vol)) {
            run.record(*a, b);
        }
        run.trials += 1;
    }
    run
}

pub fn oracle_smoothing(trials: usize, seed: u64) -> OracleRun {
    let mut r = rng(seed);
    let mut run = OracleRun::default();
    for _ in 0..trials {
        let dims = [r.random_range(1..10), r.random_range(1..10), r.random_range(1..10), 1];
        let v4 = random_volume(&mut r, dims);
        let v3 = v4.frame_volume(0);
        let fwhm = r.random_range(1.0..12.0);
        let got = gaussian_smooth(&v3, fwhm).unwrap();
        for (a, b) in got.data().iter().zip(smooth_dense(&v3, fwhm)) {
            run.record(*a, b);
        }
        run.trials += 1;
    }
    run
}
