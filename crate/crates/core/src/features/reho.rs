//! Regional homogeneity: mean pairwise time-series correlation inside a
//! segment, and its per-subject / per-region summaries.

use super::segment::{GridEmbedding, RoiSegment};
use crate::error::{Error, Result};
use crate::volume::Volume4D;

/// Pairwise time correlations of all voxel pairs in one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCorrelation {
    pub size: usize,
    /// Row-major `size * size`.
    pub values: Vec<f64>,
    /// Positions (within the segment) of voxels with constant time series.
    pub degenerate: Vec<usize>,
}

impl PairwiseCorrelation {
    pub fn get(&self, k: usize, z: usize) -> f64 {
        self.values[k * self.size + z]
    }
}

/// Centred samples and their sum of squares.
fn centred(series: &[f64]) -> (Vec<f64>, f64) {
    let m = series.iter().sum::<f64>() / series.len() as f64;
    let c: Vec<f64> = series.iter().map(|v| v - m).collect();
    let ss = c.iter().map(|v| v * v).sum::<f64>();
    (c, ss)
}

pub fn pairwise_time_correlation(series: &[Vec<f64>]) -> Result<PairwiseCorrelation> {
    let size = series.len();
    let m = series.first().map_or(0, Vec::len);
    if m < 2 {
        return Err(Error::InsufficientSamples(format!(
            "time correlation needs at least 2 samples, got {m}"
        )));
    }
    if series.iter().any(|s| s.len() != m) {
        return Err(Error::Shape("time series lengths differ".into()));
    }
    let centred: Vec<(Vec<f64>, f64)> = series.iter().map(|s| centred(s)).collect();
    let degenerate: Vec<usize> = series
        .iter()
        .enumerate()
        .filter(|(_, s)| s.iter().all(|&v| v == s[0]))
        .map(|(i, _)| i)
        .collect();
    let is_deg = |i: usize| degenerate.binary_search(&i).is_ok();

    let mut values = vec![0.0; size * size];
    for k in 0..size {
        if is_deg(k) {
            continue;
        }
        values[k * size + k] = 1.0;
        let (ck, sk) = &centred[k];
        for z in k + 1..size {
            if is_deg(z) {
                continue;
            }
            let (cz, sz) = &centred[z];
            let dot: f64 = ck.iter().zip(cz).map(|(a, b)| a * b).sum();
            let r = (dot / (sk * sz).sqrt()).clamp(-1.0, 1.0);
            values[k * size + z] = r;
            values[z * size + k] = r;
        }
    }
    Ok(PairwiseCorrelation {
        size,
        values,
        degenerate,
    })
}

/// Pairwise time correlations of the voxels of `segment`.
pub fn reho_pairwise(vol: &Volume4D, segment: &RoiSegment, embedding: &GridEmbedding) -> Result<PairwiseCorrelation> {
    if vol.nt() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "ReHo needs at least 2 time samples, got {}",
            vol.nt()
        )));
    }
    let series: Vec<Vec<f64>> = segment
        .grid_voxels(embedding, vol.spatial_dims())?
        .into_iter()
        .map(|[x, y, z]| vol.series(x, y, z))
        .collect();
    pairwise_time_correlation(&series)
}

/// Mean over all ordered pairs, diagonal included.
pub fn reho_region(pc: &PairwiseCorrelation) -> f64 {
    let n = pc.size as f64;
    pc.values.iter().sum::<f64>() / (n * n)
}

/// Subjects x regions table of ReHo values.
#[derive(Debug, Clone, PartialEq)]
pub struct RehoTable {
    pub subjects: Vec<String>,
    pub regions: Vec<u32>,
    /// Row-major, one row per subject.
    pub values: Vec<f64>,
}

impl RehoTable {
    pub fn get(&self, subject: usize, region: usize) -> f64 {
        self.values[subject * self.regions.len() + region]
    }
}

/// Mean and two spreads of a group of values: the literal `(1/n) sqrt(sum d^2)`
/// and the sample standard deviation `sqrt(sum d^2 / (n - 1))` (0 when n = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub std_literal: f64,
    pub std_sample: f64,
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> Spread {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    Spread {
        mean,
        std_literal: ss.sqrt() / n,
        std_sample: if n > 1.0 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RehoSummary {
    /// One entry per subject, over that subject's regions.
    pub per_subject: Vec<Spread>,
    /// One entry per region, over subjects.
    pub per_region: Vec<Spread>,
}

pub fn reho_summary(table: &RehoTable) -> Result<RehoSummary> {
    let (ns, nr) = (table.subjects.len(), table.regions.len());
    if ns == 0 || nr == 0 || table.values.len() != ns * nr {
        return Err(Error::Shape(format!(
            "ReHo table must be non-empty and {ns}x{nr}, got {} values",
            table.values.len()
        )));
    }
    let per_subject = (0..ns)
        .map(|i| spread((0..nr).map(move |j| table.get(i, j))))
        .collect();
    let per_region = (0..nr)
        .map(|j| spread((0..ns).map(move |i| table.get(i, j))))
        .collect();
    Ok(RehoSummary {
        per_subject,
        per_region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_series_all_ones() {
        let s = vec![1.0, 3.0, 2.0, 5.0];
        let pc = pairwise_time_correlation(&[s.clone(), s.clone(), s]).unwrap();
        assert!(pc.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!((reho_region(&pc) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anti_correlated_pair() {
        let s = vec![1.0, -2.0, 0.5, 0.5];
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let pc = pairwise_time_correlation(&[s, neg]).unwrap();
        assert_eq!(pc.get(0, 1), -1.0);
        assert_eq!(reho_region(&pc), 0.0);
    }

    #[test]
    fn two_voxel_closed_form() {
        let pc = PairwiseCorrelation {
            size: 2,
            values: vec![1.0, 0.3, 0.3, 1.0],
            degenerate: vec![],
        };
        assert!((reho_region(&pc) - (2.0 + 2.0 * 0.3) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn constant_series_flagged() {
        let pc = pairwise_time_correlation(&[vec![1.0, 2.0, 4.0], vec![7.0; 3]]).unwrap();
        assert_eq!(pc.degenerate, vec![1]);
        assert_eq!(pc.values, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn needs_two_samples() {
        assert!(matches!(
            pairwise_time_correlation(&[vec![1.0], vec![2.0]]),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn summary_single_and_constant() {
        let t = RehoTable {
            subjects: vec!["a".into()],
            regions: vec![1],
            values: vec![0.4],
        };
        let s = reho_summary(&t).unwrap();
        assert_eq!(s.per_subject[0], Spread { mean: 0.4, std_literal: 0.0, std_sample: 0.0 });
        assert_eq!(s.per_region[0], Spread { mean: 0.4, std_literal: 0.0, std_sample: 0.0 });

        let t = RehoTable {
            subjects: vec!["a".into(), "b".into()],
            regions: vec![1, 2, 3],
            values: vec![0.25; 6],
        };
        let s = reho_summary(&t).unwrap();
        assert!(s.per_subject.iter().chain(&s.per_region).all(|x| x.std_literal == 0.0 && x.std_sample == 0.0));
    }

    #[test]
    fn summary_matches_hand_computation() {
        // 3 subjects x 4 regions, worked by hand
        let t = RehoTable {
            subjects: vec!["a".into(), "b".into(), "c".into()],
            regions: vec![1, 2, 3, 4],
            values: vec![
                0.1, 0.2, 0.3, 0.4, //
                0.5, 0.5, 0.5, 0.5, //
                0.0, 0.4, 0.8, 0.4,
            ],
        };
        let s = reho_summary(&t).unwrap();
        // subject a: mean 0.25, sum d^2 = 0.05
        assert!((s.per_subject[0].mean - 0.25).abs() < 1e-15);
        assert!((s.per_subject[0].std_literal - 0.05f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((s.per_subject[0].std_sample - (0.05f64 / 3.0).sqrt()).abs() < 1e-15);
        // subject c: mean 0.4, sum d^2 = 0.16 + 0 + 0.16 + 0 = 0.32
        assert!((s.per_subject[2].std_literal - 0.32f64.sqrt() / 4.0).abs() < 1e-15);
        // region 1: values 0.1, 0.5, 0.0 -> mean 0.2, sum d^2 = 0.01 + 0.09 + 0.04 = 0.14
        assert!((s.per_region[0].mean - 0.2).abs() < 1e-15);
        assert!((s.per_region[0].std_literal - 0.14f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((s.per_region[0].std_sample - 0.07f64.sqrt()).abs() < 1e-15);
    }
}
