use crate::error::{Error, Result};
use crate::volume::Volume3D;

pub const DEFAULT_NMI_BINS: usize = 64;

fn bin_indices(values: &[f64], bins: usize, name: &str) -> Result<Vec<usize>> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::DegenerateHistogram(format!(
            "volume {name} has zero intensity range"
        )));
    }
    let width = (hi - lo) / bins as f64;
    Ok(values
        .iter()
        .map(|&v| (((v - lo) / width) as usize).min(bins - 1))
        .collect())
}

fn entropy(counts: &[u64], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(X,Y) / sqrt(H(X) H(Y))` from a joint
/// histogram of equal-width bins spanning each volume's own range. Entropies
/// are in nats.
pub fn nmi(a: &Volume3D, b: &Volume3D, bins: usize) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "volume dimensions differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    let ia = bin_indices(a.data(), bins, "a")?;
    let ib = bin_indices(b.data(), bins, "b")?;

    let mut joint = vec![0u64; bins * bins];
    let mut ca = vec![0u64; bins];
    let mut cb = vec![0u64; bins];
    for (&x, &y) in ia.iter().zip(&ib) {
        joint[x * bins + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let total = ia.len() as f64;
    let ha = entropy(&ca, total);
    let hb = entropy(&cb, total);
    let hab = entropy(&joint, total);
    if ha == 0.0 || hb == 0.0 {
        return Err(Error::DegenerateHistogram("zero marginal entropy".into()));
    }
    Ok(((ha + hb - hab) / (ha * hb).sqrt()).max(0.0))
}
