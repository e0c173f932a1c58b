//! ROI construction along the curve and per-subject features: spatial
//! correlation matrices and regional homogeneity.

mod atlas;
mod correlation;
mod matrix_io;
mod reho;
mod segment;

pub use atlas::{load_seed_atlas, parse_seed_atlas, Region, SeedAtlas};
pub use correlation::{correlation_matrix, pearson_spatial, ClassLabel, CorrelationMatrix, Pearson};
pub use matrix_io::{matrix_to_csv, read_matrix, write_matrix};
pub use reho::{
    pairwise_time_correlation, reho_pairwise, reho_region, reho_summary, PairwiseCorrelation, RehoSummary,
    RehoTable, Spread,
};
pub use segment::{check_overlaps, extract_segment, roi_signal_array, GridEmbedding, Overlap, RoiSegment};

use crate::error::Result;
use crate::hilbert::HilbertCurve;
use crate::volume::Volume3D;

/// Segments for every atlas region, in atlas order.
pub fn build_segments(curve: &HilbertCurve, atlas: &SeedAtlas, half_length: usize) -> Result<Vec<RoiSegment>> {
    atlas
        .regions()
        .iter()
        .map(|r| extract_segment(curve, r.id, r.seed, half_length))
        .collect()
}

/// Correlation matrix of one time-averaged volume.
pub fn extract_matrix(
    avg: &Volume3D,
    segments: &[RoiSegment],
    embedding: &GridEmbedding,
    subject_id: &str,
    label: ClassLabel,
) -> Result<CorrelationMatrix> {
    let arrays = segments
        .iter()
        .map(|s| roi_signal_array(avg, s, embedding))
        .collect::<Result<Vec<_>>>()?;
    let mut m = correlation_matrix(&arrays, subject_id, label)?;
    m.half_length = segments.first().map(|s| s.half_length);
    Ok(m)
}
