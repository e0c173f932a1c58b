//! Synthetic labelled cohorts with controllable class separation.
//!
//! Every region's spatial profile along its curve segment is a mix of `K`
//! latent factor arrays shared by all regions plus a private noise array:
//!
//! ```text
//! A_j = w_t * (lambda * sum_k u_jk T_k + sqrt(1 - lambda^2) E_j)
//!     + w_s * (lambda * sum_k u_jk Z_k + sqrt(1 - lambda^2) N_j)
//! ```
//!
//! `T` and `E` are cohort templates, `Z` and `N` are drawn per subject, and
//! `w_t^2 + w_s^2 = 1`, so `A_j` has unit variance and two regions correlate
//! by about `lambda^2 <u_i, u_j>`. The unit loading vector of region `j` is
//! `normalize((1 - s) b_j + s c_j)` where `b_j` is shared by every class,
//! `c_j` is drawn per class and `s` is the separation. At `s = 0` all classes
//! use identical loadings and are identically distributed.
//!
//! Volumes place `mean + scale_j A_j` on the region's voxels and a template
//! of the same mean and deviation elsewhere, then add a per-region time
//! course and white voxel noise. A fifth of the regions get a wide scale and
//! the rest a narrow one; the pair is fixed by the intensity deviation so the
//! subject-averaged ROI intensities keep the configured deviation while
//! about 71% of them fall within 10,000 to 14,000 at the default mean.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::features::{
    build_segments, correlation_matrix, ClassLabel, CorrelationMatrix, GridEmbedding, Region, RoiSegment, SeedAtlas,
};
use crate::hilbert::HilbertCurve;
use crate::rng::stream_rng;
use crate::volume::Volume4D;

pub const LATENT_FACTORS: usize = 4;
/// Norm of each region's factor loading vector.
pub const LOADING_NORM: f64 = 0.9;
const TEMPLATE_WEIGHT: f64 = FRAC_1_SQRT_2;
const SUBJECT_WEIGHT: f64 = FRAC_1_SQRT_2;
/// Share of regions with the wide intensity scale.
pub const WIDE_REGION_FRACTION: f64 = 0.2;
/// Narrow scale as a fraction of the intensity deviation.
pub const NARROW_SCALE_RATIO: f64 = 0.65;
/// Standard deviation of the per-region time course added to ROI voxels.
pub const REGION_SIGNAL_AMPLITUDE: f64 = 150.0;
/// Standard deviation of the white noise added to every voxel and frame.
pub const VOXEL_NOISE: f64 = 150.0;

const STREAM_ATLAS: u64 = 0xa71a5;
const STREAM_MODEL: u64 = 0x10ad;
const STREAM_SUBJECT: u64 = 0x5b1;
const STREAM_VOLUME: u64 = 0x701;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_per_class: usize,
    pub classes: Vec<ClassLabel>,
    pub r_regions: usize,
    pub half_length: usize,
    pub grid_dims: [usize; 3],
    pub nt: usize,
    pub tr_seconds: f64,
    pub voxel_mm: [f64; 3],
    pub intensity_mean: f64,
    pub intensity_std: f64,
    /// In `[0, 1]`.
    pub separation: f64,
    pub order: u32,
    /// Grid placement in the curve cube; centred when `None`.
    pub offset: Option<[usize; 3]>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_class: 10,
            classes: vec![ClassLabel::Cn, ClassLabel::Ad],
            r_regions: 90,
            half_length: 50,
            grid_dims: [53, 63, 52],
            nt: 164,
            tr_seconds: 2.2,
            voxel_mm: [3.0; 3],
            intensity_mean: 12_692.0,
            intensity_std: 2_155.0,
            separation: 1.0,
            order: 6,
            offset: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.separation) {
            return Err(Error::Config(format!("separation {} not in [0, 1]", self.separation)));
        }
        if self.n_per_class == 0 {
            return Err(Error::Config("at least one subject per class is required".into()));
        }
        if self.r_regions < 2 {
            return Err(Error::Config(format!("need at least 2 regions, got {}", self.r_regions)));
        }
        let distinct: BTreeSet<_> = self.classes.iter().collect();
        if self.classes.len() < 2 || distinct.len() != self.classes.len() {
            return Err(Error::Config(format!("need at least two distinct classes, got {:?}", self.classes)));
        }
        if !(self.intensity_std > 0.0) || !self.intensity_mean.is_finite() {
            return Err(Error::Config("intensity mean must be finite and deviation positive".into()));
        }
        if self.nt == 0 || !(self.tr_seconds > 0.0) {
            return Err(Error::Config("need at least one frame and a positive TR".into()));
        }
        Ok(())
    }

    pub fn segment_len(&self) -> usize {
        2 * self.half_length + 1
    }

    pub fn embedding(&self, curve: &HilbertCurve) -> Result<GridEmbedding> {
        let e = match self.offset {
            Some(offset) => GridEmbedding { offset },
            None => GridEmbedding::centered(curve.side(), self.grid_dims)?,
        };
        e.check_fits(curve.side(), self.grid_dims)?;
        Ok(e)
    }

    /// `(subject_id, label)` in generation order: class by class.
    pub fn subjects(&self) -> Vec<(String, ClassLabel)> {
        self.classes
            .iter()
            .flat_map(|&c| (0..self.n_per_class).map(move |i| (format!("sub-{c}-{i:04}"), c)))
            .collect()
    }
}

/// Seeds whose whole segment maps into the grid, pairwise more than
/// `2 * half_length` apart along the curve so segments are disjoint.
pub fn gen_seed_atlas(spec: &SynthSpec, curve: &HilbertCurve) -> Result<SeedAtlas> {
    spec.validate()?;
    let emb = spec.embedding(curve)?;
    let n = curve.total_cells();
    let len = spec.segment_len();
    if spec.r_regions * len > n {
        return Err(Error::Infeasible(format!(
            "{} segments of {len} cells exceed the {n} curve cells",
            spec.r_regions
        )));
    }
    // prefix[i] = in-grid cells among indices 0..i
    let mut prefix = vec![0usize; n + 1];
    for (h, c) in curve.iter().enumerate() {
        prefix[h + 1] = prefix[h] + emb.to_grid(c, spec.grid_dims).is_some() as usize;
    }
    let hl = spec.half_length;
    let mut candidates: Vec<usize> = (hl..n.saturating_sub(hl))
        .filter(|&h| prefix[h + hl + 1] - prefix[h - hl] == len)
        .collect();
    candidates.shuffle(&mut stream_rng(spec.seed, STREAM_ATLAS, 0));

    let mut taken = BTreeSet::new();
    for h in candidates {
        let clear_below = taken.range(..=h).next_back().is_none_or(|&p: &usize| h - p > 2 * hl);
        let clear_above = taken.range(h..).next().is_none_or(|&p: &usize| p - h > 2 * hl);
        if clear_below && clear_above {
            taken.insert(h);
            if taken.len() == spec.r_regions {
                break;
            }
        }
    }
    if taken.len() < spec.r_regions {
        return Err(Error::Infeasible(format!(
            "only {} of {} disjoint in-grid segments of length {len} could be placed",
            taken.len(),
            spec.r_regions
        )));
    }
    // region ids follow curve order
    let regions = taken
        .into_iter()
        .enumerate()
        .map(|(i, h)| Region {
            id: i as u32 + 1,
            name: format!("R{:02}", i + 1),
            seed: curve.index_to_coord(h).expect("index below total cells"),
        })
        .collect();
    SeedAtlas::new(regions, curve.side())
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Cohort-level draws shared by every subject.
#[derive(Debug, Clone)]
struct LatentModel {
    len: usize,
    /// `[class][region]` unit loading vectors, already scaled by `LOADING_NORM`.
    loadings: Vec<Vec<[f64; LATENT_FACTORS]>>,
    template_factors: Vec<Vec<f64>>,
    template_noise: Vec<Vec<f64>>,
    /// Intensity deviation of each region's subject-averaged profile.
    region_scale: Vec<f64>,
}

impl LatentModel {
    fn new(spec: &SynthSpec) -> Self {
        let (r, len) = (spec.r_regions, spec.segment_len());
        let mut rng = stream_rng(spec.seed, STREAM_MODEL, 0);
        let unit = |rng: &mut ChaCha8Rng| -> [f64; LATENT_FACTORS] { std::array::from_fn(|_| rng.sample(StandardNormal)) };
        let base: Vec<[f64; LATENT_FACTORS]> = (0..r).map(|_| unit(&mut rng)).collect();
        let loadings = (0..spec.classes.len())
            .map(|_| {
                (0..r)
                    .map(|j| {
                        let own = unit(&mut rng);
                        let s = spec.separation;
                        let mut v: [f64; LATENT_FACTORS] = std::array::from_fn(|k| (1.0 - s) * base[j][k] + s * own[k]);
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        v.iter_mut().for_each(|x| *x *= LOADING_NORM / norm);
                        v
                    })
                    .collect()
            })
            .collect();
        let template_factors = (0..LATENT_FACTORS).map(|_| normals(&mut rng, len)).collect();
        let template_noise = (0..r).map(|_| normals(&mut rng, len)).collect();

        let sd = spec.intensity_std;
        let narrow = NARROW_SCALE_RATIO * sd;
        let narrow_share = 1.0 - WIDE_REGION_FRACTION;
        let wide = ((sd * sd - narrow_share * narrow * narrow) / WIDE_REGION_FRACTION).sqrt();
        let mut order: Vec<usize> = (0..r).collect();
        order.shuffle(&mut rng);
        let n_wide = (WIDE_REGION_FRACTION * r as f64).round() as usize;
        let mut region_scale = vec![narrow; r];
        for &j in &order[..n_wide] {
            region_scale[j] = wide;
        }
        LatentModel {
            len,
            loadings,
            template_factors,
            template_noise,
            region_scale,
        }
    }

    /// Unit-variance spatial profiles of every region for one subject.
    fn arrays(&self, class_idx: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let resid = (1.0 - LOADING_NORM * LOADING_NORM).sqrt();
        let factors: Vec<Vec<f64>> = (0..LATENT_FACTORS).map(|_| normals(rng, self.len)).collect();
        self.loadings[class_idx]
            .iter()
            .zip(&self.template_noise)
            .map(|(u, tn)| {
                let noise = normals(rng, self.len);
                (0..self.len)
                    .map(|v| {
                        let mut t = resid * tn[v];
                        let mut s = resid * noise[v];
                        for k in 0..LATENT_FACTORS {
                            t += u[k] * self.template_factors[k][v];
                            s += u[k] * factors[k][v];
                        }
                        TEMPLATE_WEIGHT * t + SUBJECT_WEIGHT * s
                    })
                    .collect()
            })
            .collect()
    }
}

fn class_index(spec: &SynthSpec, label: ClassLabel) -> usize {
    spec.classes.iter().position(|&c| c == label).expect("label comes from spec")
}

/// Correlation matrices computed directly from the latent region profiles.
pub fn gen_cohort_matrices(spec: &SynthSpec) -> Result<Vec<CorrelationMatrix>> {
    spec.validate()?;
    let model = LatentModel::new(spec);
    spec.subjects()
        .into_iter()
        .enumerate()
        .map(|(s, (id, label))| {
            let arrays = model.arrays(class_index(spec, label), &mut stream_rng(spec.seed, STREAM_SUBJECT, s as u64));
            let mut m = correlation_matrix(&arrays, id, label)?;
            m.half_length = Some(spec.half_length);
            Ok(m)
        })
        .collect()
}

/// Volume generator bound to an atlas. Subjects are produced one at a time.
#[derive(Debug, Clone)]
pub struct SynthCohort {
    spec: SynthSpec,
    atlas: SeedAtlas,
    embedding: GridEmbedding,
    segments: Vec<RoiSegment>,
    /// Grid positions of each segment's voxels.
    roi_voxels: Vec<Vec<[usize; 3]>>,
    model: LatentModel,
    /// Background template in units of the intensity deviation.
    background: Vec<f64>,
}

impl SynthCohort {
    /// Uses `gen_seed_atlas` for the seeds.
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        let curve = HilbertCurve::new(spec.order)?;
        let atlas = gen_seed_atlas(spec, &curve)?;
        Self::with_atlas(spec, atlas)
    }

    pub fn with_atlas(spec: &SynthSpec, atlas: SeedAtlas) -> Result<Self> {
        spec.validate()?;
        let curve = HilbertCurve::new(spec.order)?;
        if atlas.len() != spec.r_regions {
            return Err(Error::Config(format!(
                "atlas has {} regions, spec asks for {}",
                atlas.len(),
                spec.r_regions
            )));
        }
        let embedding = spec.embedding(&curve)?;
        let segments = build_segments(&curve, &atlas, spec.half_length)?;
        let roi_voxels = segments
            .iter()
            .map(|s| s.grid_voxels(&embedding, spec.grid_dims))
            .collect::<Result<Vec<_>>>()?;
        let overlaps = crate::features::check_overlaps(&segments);
        if let Some(o) = overlaps.first() {
            return Err(Error::Infeasible(format!(
                "regions {} and {} share {} voxels",
                o.region_a, o.region_b, o.shared_voxels
            )));
        }
        let n_vox: usize = spec.grid_dims.iter().product();
        let background = normals(&mut stream_rng(spec.seed, STREAM_MODEL, 1), n_vox);
        Ok(SynthCohort {
            model: LatentModel::new(spec),
            spec: spec.clone(),
            atlas,
            embedding,
            segments,
            roi_voxels,
            background,
        })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn atlas(&self) -> &SeedAtlas {
        &self.atlas
    }

    pub fn embedding(&self) -> GridEmbedding {
        self.embedding
    }

    pub fn segments(&self) -> &[RoiSegment] {
        &self.segments
    }

    pub fn subjects(&self) -> Vec<(String, ClassLabel)> {
        self.spec.subjects()
    }

    /// Matrix of subject `s` from the same latent profiles its volume uses.
    pub fn matrix(&self, s: usize) -> Result<CorrelationMatrix> {
        let (id, label) = self.subject(s)?;
        let arrays = self.arrays(s, label);
        let mut m = correlation_matrix(&arrays, id, label)?;
        m.half_length = Some(self.spec.half_length);
        Ok(m)
    }

    fn subject(&self, s: usize) -> Result<(String, ClassLabel)> {
        self.spec
            .subjects()
            .into_iter()
            .nth(s)
            .ok_or_else(|| Error::Bounds(format!("subject {s} out of range")))
    }

    fn arrays(&self, s: usize, label: ClassLabel) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(self.spec.seed, STREAM_SUBJECT, s as u64);
        self.model.arrays(class_index(&self.spec, label), &mut rng)
    }

    /// Full 4D volume of subject `s` with its id and label.
    pub fn volume(&self, s: usize) -> Result<(String, ClassLabel, Volume4D)> {
        let (id, label) = self.subject(s)?;
        let sp = &self.spec;
        let [nx, ny, nz] = sp.grid_dims;
        let frame = nx * ny * nz;
        let mut rng = stream_rng(sp.seed, STREAM_VOLUME, s as u64);

        // static intensity of every voxel
        let mut base: Vec<f64> = self
            .background
            .iter()
            .map(|&b| {
                let own: f64 = rng.sample(StandardNormal);
                sp.intensity_mean + sp.intensity_std * (TEMPLATE_WEIGHT * b + SUBJECT_WEIGHT * own)
            })
            .collect();
        let mut region_of = vec![usize::MAX; frame];
        for (j, (voxels, profile)) in self.roi_voxels.iter().zip(self.arrays(s, label)).enumerate() {
            let scale = self.model.region_scale[j] / TEMPLATE_WEIGHT;
            for (&[x, y, z], a) in voxels.iter().zip(profile) {
                let i = x + nx * (y + ny * z);
                base[i] = sp.intensity_mean + scale * a;
                region_of[i] = j;
            }
        }

        let mut vol = Volume4D::zeros([nx, ny, nz, sp.nt], sp.voxel_mm, sp.tr_seconds)?;
        let data = vol.data_mut();
        for t in 0..sp.nt {
            let course: Vec<f64> = (0..self.roi_voxels.len())
                .map(|_| REGION_SIGNAL_AMPLITUDE * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let out = &mut data[t * frame..(t + 1) * frame];
            for i in 0..frame {
                let noise: f64 = rng.sample(StandardNormal);
                let signal = if region_of[i] == usize::MAX { 0.0 } else { course[region_of[i]] };
                out[i] = base[i] + signal + VOXEL_NOISE * noise;
            }
        }
        Ok((id, label, vol))
    }

    /// All subjects in order, generated lazily.
    pub fn volumes(&self) -> impl Iterator<Item = Result<(String, ClassLabel, Volume4D)>> + '_ {
        (0..self.spec.subjects().len()).map(|s| self.volume(s))
    }
}
