use crate::error::{Error, Result};
use crate::hilbert::{Coord, HilbertCurve};
use crate::volume::Volume3D;

/// Placement of the data grid inside the curve cube: grid voxel
/// `c - offset` corresponds to cube voxel `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridEmbedding {
    pub offset: [usize; 3],
}

impl GridEmbedding {
    /// Centres `grid_dims` in a cube of side `cube_side` (offsets `floor((side - n) / 2)`).
    pub fn centered(cube_side: usize, grid_dims: [usize; 3]) -> Result<Self> {
        if grid_dims.iter().any(|&n| n > cube_side) {
            return Err(Error::Config(format!(
                "grid {grid_dims:?} does not fit in a cube of side {cube_side}"
            )));
        }
        Ok(GridEmbedding {
            offset: grid_dims.map(|n| (cube_side - n) / 2),
        })
    }

    pub fn check_fits(&self, cube_side: usize, grid_dims: [usize; 3]) -> Result<()> {
        if (0..3).any(|i| self.offset[i] + grid_dims[i] > cube_side) {
            return Err(Error::Config(format!(
                "grid {grid_dims:?} at offset {:?} does not fit in a cube of side {cube_side}",
                self.offset
            )));
        }
        Ok(())
    }

    pub fn to_grid(&self, c: Coord, grid_dims: [usize; 3]) -> Option<[usize; 3]> {
        let mut g = [0; 3];
        for i in 0..3 {
            g[i] = c[i].checked_sub(self.offset[i])?;
            if g[i] >= grid_dims[i] {
                return None;
            }
        }
        Some(g)
    }
}

/// Contiguous run of the curve centred on a region seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiSegment {
    pub region_id: u32,
    pub seed_index: usize,
    pub half_length: usize,
    pub voxels: Vec<Coord>,
}

impl RoiSegment {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn seed(&self) -> Coord {
        self.voxels[self.half_length]
    }

    /// Inclusive curve-index range covered by the segment.
    pub fn index_range(&self) -> (usize, usize) {
        (self.seed_index - self.half_length, self.seed_index + self.half_length)
    }

    /// Segment voxels mapped into the data grid.
    pub fn grid_voxels(&self, embedding: &GridEmbedding, grid_dims: [usize; 3]) -> Result<Vec<[usize; 3]>> {
        self.voxels
            .iter()
            .map(|&c| {
                embedding.to_grid(c, grid_dims).ok_or_else(|| {
                    Error::Bounds(format!(
                        "region {}: voxel {c:?} maps outside the {grid_dims:?} grid at offset {:?}",
                        self.region_id, embedding.offset
                    ))
                })
            })
            .collect()
    }
}

pub fn extract_segment(
    curve: &HilbertCurve,
    region_id: u32,
    seed: Coord,
    half_length: usize,
) -> Result<RoiSegment> {
    let seed_index = curve.coord_to_index(seed)?;
    if seed_index < half_length || seed_index + half_length >= curve.total_cells() {
        return Err(Error::Bounds(format!(
            "segment of region {region_id} ([{}, {}]) leaves the curve index range [0, {})",
            seed_index as i64 - half_length as i64,
            seed_index + half_length,
            curve.total_cells()
        )));
    }
    let voxels = (seed_index - half_length..=seed_index + half_length)
        .map(|h| curve.index_to_coord_unchecked(h))
        .collect();
    Ok(RoiSegment {
        region_id,
        seed_index,
        half_length,
        voxels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub region_a: u32,
    pub region_b: u32,
    pub shared_voxels: usize,
}

/// Pairs of segments whose curve-index ranges intersect.
pub fn check_overlaps(segments: &[RoiSegment]) -> Vec<Overlap> {
    let mut out = Vec::new();
    for (i, a) in segments.iter().enumerate() {
        let (alo, ahi) = a.index_range();
        for b in &segments[i + 1..] {
            let (blo, bhi) = b.index_range();
            let lo = alo.max(blo);
            let hi = ahi.min(bhi);
            if lo <= hi {
                out.push(Overlap {
                    region_a: a.region_id,
                    region_b: b.region_id,
                    shared_voxels: hi - lo + 1,
                });
            }
        }
    }
    out
}

/// Time-averaged values along the segment, in curve order.
pub fn roi_signal_array(avg: &Volume3D, segment: &RoiSegment, embedding: &GridEmbedding) -> Result<Vec<f64>> {
    Ok(segment
        .grid_voxels(embedding, avg.dims())?
        .into_iter()
        .map(|[x, y, z]| avg.get(x, y, z))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg_at(curve: &HilbertCurve, id: u32, index: usize, half: usize) -> RoiSegment {
        extract_segment(curve, id, curve.index_to_coord(index).unwrap(), half).unwrap()
    }

    #[test]
    fn lengths_and_seed_position() {
        let curve = HilbertCurve::new(6).unwrap();
        let seed = curve.index_to_coord(5000).unwrap();
        let s0 = extract_segment(&curve, 1, seed, 0).unwrap();
        assert_eq!(s0.voxels, vec![seed]);
        for (half, len) in [(50, 101), (100, 201)] {
            let s = extract_segment(&curve, 1, seed, half).unwrap();
            assert_eq!(s.len(), len);
            assert_eq!(s.seed(), seed);
            for w in s.voxels.windows(2) {
                let d: usize = (0..3).map(|i| w[0][i].abs_diff(w[1][i])).sum();
                assert_eq!(d, 1);
            }
        }
    }

    #[test]
    fn refuses_to_leave_curve() {
        let curve = HilbertCurve::new(3).unwrap();
        assert!(matches!(
            extract_segment(&curve, 1, [0, 0, 0], 1),
            Err(Error::Bounds(_))
        ));
        let last = curve.index_to_coord(511).unwrap();
        assert!(extract_segment(&curve, 1, last, 1).is_err());
        assert!(extract_segment(&curve, 1, last, 0).is_ok());
    }

    #[test]
    fn overlap_interval_arithmetic() {
        let curve = HilbertCurve::new(6).unwrap();
        let a = seg_at(&curve, 1, 10_000, 100);
        let far = seg_at(&curve, 2, 10_500, 100);
        let near = seg_at(&curve, 3, 10_100, 100);
        assert!(check_overlaps(&[a.clone(), far.clone()]).is_empty());
        let report = check_overlaps(&[a, far, near]);
        assert_eq!(
            report,
            vec![Overlap { region_a: 1, region_b: 3, shared_voxels: 101 }]
        );
    }

    #[test]
    fn signal_array_follows_curve_order() {
        let curve = HilbertCurve::new(4).unwrap();
        let dims = [16, 16, 16];
        let mut data = vec![0.0; 4096];
        for (h, c) in curve.iter().enumerate() {
            data[c[0] + 16 * (c[1] + 16 * c[2])] = h as f64;
        }
        let vol = Volume3D::new(dims, [1.0; 3], data).unwrap();
        let emb = GridEmbedding { offset: [0; 3] };
        let s = seg_at(&curve, 4, 1000, 20);
        let arr = roi_signal_array(&vol, &s, &emb).unwrap();
        let expect: Vec<f64> = (980..=1020).map(|h| h as f64).collect();
        assert_eq!(arr, expect);

        let s0 = seg_at(&curve, 4, 77, 0);
        assert_eq!(roi_signal_array(&vol, &s0, &emb).unwrap(), vec![77.0]);
    }

    #[test]
    fn out_of_grid_names_region() {
        let curve = HilbertCurve::new(4).unwrap();
        let vol = Volume3D::filled([4, 4, 4], [1.0; 3], 2.0).unwrap();
        let emb = GridEmbedding { offset: [6, 6, 6] };
        let s = extract_segment(&curve, 42, [0, 0, 1], 0).unwrap();
        let err = roi_signal_array(&vol, &s, &emb).unwrap_err();
        assert!(err.to_string().contains("region 42"));
        let inside = extract_segment(&curve, 42, [7, 7, 7], 0).unwrap();
        assert_eq!(roi_signal_array(&vol, &inside, &emb).unwrap(), vec![2.0]);
    }

    #[test]
    fn centered_offsets() {
        let e = GridEmbedding::centered(64, [53, 63, 52]).unwrap();
        assert_eq!(e.offset, [5, 0, 6]);
        assert!(GridEmbedding::centered(64, [65, 1, 1]).is_err());
    }
}
