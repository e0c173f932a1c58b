use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{GridEmbedding, RoiSegment};
use crate::volume::Volume3D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            lo: 0.0,
            hi: 30_000.0,
            bin_width: 1_000.0,
        }
    }
}

/// Fixed-width histogram; values outside `[lo, hi)` are tallied separately so
/// that `counts + underflow + overflow` equals the number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(spec: HistogramSpec) -> Result<Self> {
        if !(spec.bin_width > 0.0) || !(spec.hi > spec.lo) {
            return Err(Error::Config(format!("invalid histogram range {spec:?}")));
        }
        let bins = ((spec.hi - spec.lo) / spec.bin_width).ceil() as usize;
        Ok(Histogram {
            lo: spec.lo,
            bin_width: spec.bin_width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn add(&mut self, v: f64) {
        if v < self.lo {
            self.underflow += 1;
            return;
        }
        let i = ((v - self.lo) / self.bin_width) as usize;
        match self.counts.get_mut(i) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| self.lo + i as f64 * self.bin_width)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        let e = self.edges();
        let _ = writeln!(s, "-inf,{},{}", e[0], self.underflow);
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", e[i], e[i + 1], c);
        }
        let _ = writeln!(s, "{},inf,{}", e[e.len() - 1], self.overflow);
        s
    }
}

/// Cohort-level time-averaged intensity statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortStats {
    pub subjects: usize,
    /// Subject-mean of each region's voxel values, `[region][voxel]`.
    pub vi_sa: Vec<Vec<f64>>,
    /// Subject-mean of each region's seed voxel.
    pub si_sa: Vec<f64>,
    pub vi_mean: f64,
    pub vi_std: f64,
    pub si_mean: f64,
    pub si_std: f64,
    /// Over all (subject, region, voxel) triples.
    pub triple_mean: f64,
    pub triple_std: f64,
    /// Histogram of the `vi_sa` values.
    pub histogram: Histogram,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl CohortStats {
    /// Fraction of `vi_sa` values in `[lo, hi]`.
    pub fn vi_fraction_within(&self, lo: f64, hi: f64) -> f64 {
        let all = self.vi_sa.iter().flatten();
        let n = all.clone().count() as f64;
        all.filter(|&&v| v >= lo && v <= hi).count() as f64 / n
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("statistic,value\n");
        for (k, v) in [
            ("subjects", self.subjects as f64),
            ("vi_mean", self.vi_mean),
            ("vi_std", self.vi_std),
            ("si_mean", self.si_mean),
            ("si_std", self.si_std),
            ("triple_mean", self.triple_mean),
            ("triple_std", self.triple_std),
        ] {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    /// Writes `cohort_stats.csv` and `histogram.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        for (name, body) in [
            ("cohort_stats.csv", self.summary_csv()),
            ("histogram.csv", self.histogram.to_csv()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Averages each ROI voxel and seed voxel over subjects.
pub fn cohort_stats(
    time_avg_volumes: &[Volume3D],
    segments: &[RoiSegment],
    embedding: &GridEmbedding,
    histogram: HistogramSpec,
) -> Result<CohortStats> {
    let first = time_avg_volumes
        .first()
        .ok_or_else(|| Error::InsufficientSamples("cohort statistics need at least one subject".into()))?;
    let dims = first.dims();
    if time_avg_volumes.iter().any(|v| v.dims() != dims) {
        return Err(Error::Shape("subject volumes have differing dimensions".into()));
    }
    let grid: Vec<Vec<[usize; 3]>> = segments
        .iter()
        .map(|s| s.grid_voxels(embedding, dims))
        .collect::<Result<_>>()?;
    let s = time_avg_volumes.len() as f64;

    let mut vi_sa: Vec<Vec<f64>> = grid.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut si_sa = vec![0.0; segments.len()];
    for vol in time_avg_volumes {
        for (j, (voxels, seg)) in grid.iter().zip(segments).enumerate() {
            for (k, &[x, y, z]) in voxels.iter().enumerate() {
                vi_sa[j][k] += vol.get(x, y, z);
            }
            let [x, y, z] = voxels[seg.half_length];
            si_sa[j] += vol.get(x, y, z);
        }
    }
    vi_sa.iter_mut().flatten().for_each(|v| *v /= s);
    si_sa.iter_mut().for_each(|v| *v /= s);

    let (vi_mean, vi_std) = mean_std(vi_sa.iter().flatten().copied());
    let (si_mean, si_std) = mean_std(si_sa.iter().copied());
    let triples = time_avg_volumes.iter().flat_map(|vol| {
        grid.iter()
            .flatten()
            .map(move |&[x, y, z]| vol.get(x, y, z))
    });
    let (triple_mean, triple_std) = mean_std(triples);

    let mut hist = Histogram::new(histogram)?;
    vi_sa.iter().flatten().for_each(|&v| hist.add(v));

    Ok(CohortStats {
        subjects: time_avg_volumes.len(),
        vi_sa,
        si_sa,
        vi_mean,
        vi_std,
        si_mean,
        si_std,
        triple_mean,
        triple_std,
        histogram: hist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_segment;
    use crate::hilbert::HilbertCurve;

    fn setup() -> (Vec<RoiSegment>, GridEmbedding) {
        let curve = HilbertCurve::new(3).unwrap();
        let segs = vec![
            extract_segment(&curve, 1, curve.index_to_coord(10).unwrap(), 2).unwrap(),
            extract_segment(&curve, 2, curve.index_to_coord(100).unwrap(), 2).unwrap(),
        ];
        (segs, GridEmbedding { offset: [0; 3] })
    }

    fn ramp(scale: f64) -> Volume3D {
        Volume3D::new([8, 8, 8], [3.0; 3], (0..512).map(|i| scale * (1000.0 + 10.0 * i as f64)).collect()).unwrap()
    }

    #[test]
    fn single_subject_passthrough() {
        let (segs, emb) = setup();
        let v = ramp(1.0);
        let st = cohort_stats(std::slice::from_ref(&v), &segs, &emb, HistogramSpec::default()).unwrap();
        for (j, seg) in segs.iter().enumerate() {
            for (k, c) in seg.voxels.iter().enumerate() {
                assert_eq!(st.vi_sa[j][k], v.get(c[0], c[1], c[2]));
            }
            let s = seg.seed();
            assert_eq!(st.si_sa[j], v.get(s[0], s[1], s[2]));
        }
        assert_eq!(st.histogram.total(), 10);
        assert!(st.vi_std >= 0.0 && st.si_std >= 0.0);
        assert_eq!(st.vi_mean, st.triple_mean);
    }

    #[test]
    fn two_subjects_mean() {
        let (segs, emb) = setup();
        let st = cohort_stats(&[ramp(1.0), ramp(3.0)], &segs, &emb, HistogramSpec::default()).unwrap();
        let v2 = ramp(2.0);
        for (j, seg) in segs.iter().enumerate() {
            for (k, c) in seg.voxels.iter().enumerate() {
                assert_eq!(st.vi_sa[j][k], v2.get(c[0], c[1], c[2]));
            }
        }
    }

    #[test]
    fn out_of_grid_segment() {
        let (segs, _) = setup();
        let emb = GridEmbedding { offset: [4, 4, 4] };
        let v = Volume3D::filled([4, 4, 4], [3.0; 3], 1.0).unwrap();
        assert!(matches!(
            cohort_stats(&[v], &segs, &emb, HistogramSpec::default()),
            Err(Error::Bounds(_))
        ));
    }

    #[test]
    fn histogram_tallies_everything() {
        let mut h = Histogram::new(HistogramSpec::default()).unwrap();
        for v in [-5.0, 0.0, 999.9, 1000.0, 29_999.0, 30_000.0, 1e9] {
            h.add(v);
        }
        assert_eq!(h.counts.len(), 30);
        assert_eq!((h.underflow, h.overflow), (1, 2));
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[29], 1);
        assert_eq!(h.total(), 7);
    }
}
