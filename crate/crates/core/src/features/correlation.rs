use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Cn,
    Ad,
    Mci,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::Cn => "CN",
            ClassLabel::Ad => "AD",
            ClassLabel::Mci => "MCI",
        })
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CN" => Ok(ClassLabel::Cn),
            "AD" => Ok(ClassLabel::Ad),
            "MCI" => Ok(ClassLabel::Mci),
            other => Err(Error::parse("label", format!("unknown class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub value: f64,
    /// Set when either input has zero variance; `value` is then 0.
    pub degenerate: bool,
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson correlation with sample standard deviations, clamped to `[-1, 1]`.
pub fn pearson_spatial(v: &[f64], w: &[f64]) -> Result<Pearson> {
    if v.len() != w.len() {
        return Err(Error::Shape(format!(
            "array lengths differ: {} vs {}",
            v.len(),
            w.len()
        )));
    }
    let n = v.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!(
            "correlation needs at least 2 values, got {n}"
        )));
    }
    if is_constant(v) || is_constant(w) {
        return Ok(Pearson {
            value: 0.0,
            degenerate: true,
        });
    }
    let nf = n as f64;
    let mv = v.iter().sum::<f64>() / nf;
    let mw = w.iter().sum::<f64>() / nf;
    let (mut svw, mut svv, mut sww) = (0.0, 0.0, 0.0);
    for (a, b) in v.iter().zip(w) {
        let (da, db) = (a - mv, b - mw);
        svw += da * db;
        svv += da * da;
        sww += db * db;
    }
    // (1/(n-1)) sum(z_v z_w) with sample sigmas reduces to the cosine of the
    // centred vectors.
    let value = (svw / (svv * sww).sqrt()).clamp(-1.0, 1.0);
    Ok(Pearson {
        value,
        degenerate: false,
    })
}

/// Symmetric region-by-region feature matrix of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub size: usize,
    /// Row-major `size * size` values.
    pub values: Vec<f64>,
    pub subject_id: String,
    pub label: ClassLabel,
    pub half_length: Option<usize>,
    /// Zero-based positions of regions whose arrays had zero variance.
    pub degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Checks exact symmetry, exact unit diagonal, range and finiteness.
    pub fn check_invariants(&self) -> Result<()> {
        let r = self.size;
        if self.values.len() != r * r {
            return Err(Error::Shape(format!(
                "{} values for a {r}x{r} matrix",
                self.values.len()
            )));
        }
        for i in 0..r {
            if self.get(i, i) != 1.0 {
                return Err(Error::Shape(format!("diagonal entry {i} is {}", self.get(i, i))));
            }
            for j in 0..r {
                let v = self.get(i, j);
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Shape(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
                }
                if v.to_bits() != self.get(j, i).to_bits() {
                    return Err(Error::Shape(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(())
    }
}

/// Pairwise spatial correlation of `arrays`. The upper triangle is computed
/// and mirrored; the diagonal is set to exactly 1.
pub fn correlation_matrix(
    arrays: &[Vec<f64>],
    subject_id: impl Into<String>,
    label: ClassLabel,
) -> Result<CorrelationMatrix> {
    let r = arrays.len();
    if r < 2 {
        return Err(Error::Shape(format!("need at least 2 regions, got {r}")));
    }
    let n = arrays[0].len();
    if let Some(bad) = arrays.iter().position(|a| a.len() != n) {
        return Err(Error::Shape(format!(
            "region array {bad} has length {} (expected {n})",
            arrays[bad].len()
        )));
    }
    let degenerate: Vec<usize> = (0..r).filter(|&i| n < 2 || is_constant(&arrays[i])).collect();
    let mut values = vec![0.0; r * r];
    for i in 0..r {
        values[i * r + i] = 1.0;
        for j in i + 1..r {
            let p = pearson_spatial(&arrays[i], &arrays[j])?;
            values[i * r + j] = p.value;
            values[j * r + i] = p.value;
        }
    }
    Ok(CorrelationMatrix {
        size: r,
        values,
        subject_id: subject_id.into(),
        label,
        half_length: None,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_and_affine() {
        let v = [1.0, 4.0, 2.0, 8.0, 5.0];
        assert_eq!(pearson_spatial(&v, &v).unwrap().value, 1.0);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(pearson_spatial(&v, &neg).unwrap().value, -1.0);
        let aff: Vec<f64> = v.iter().map(|x| -3.0 * x + 7.0).collect();
        assert!((pearson_spatial(&v, &aff).unwrap().value + 1.0).abs() < 1e-15);
        let aff: Vec<f64> = v.iter().map(|x| 0.25 * x - 100.0).collect();
        assert!((pearson_spatial(&v, &aff).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_errors() {
        let p = pearson_spatial(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p, Pearson { value: 0.0, degenerate: true });
        assert!(matches!(pearson_spatial(&[1.0], &[1.0]), Err(Error::InsufficientSamples(_))));
        assert!(matches!(pearson_spatial(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn matrix_cases() {
        let v = vec![0.3, -1.0, 2.5, 0.0];
        let m = correlation_matrix(&[v.clone(), v.clone(), v.clone()], "s", ClassLabel::Cn).unwrap();
        assert!(m.values.iter().all(|&x| x == 1.0));
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let m = correlation_matrix(&[v, neg], "s", ClassLabel::Ad).unwrap();
        assert_eq!(m.values, vec![1.0, -1.0, -1.0, 1.0]);
        m.check_invariants().unwrap();
    }

    #[test]
    fn degenerate_region_recorded() {
        let m = correlation_matrix(
            &[vec![1.0, 2.0, 3.0], vec![5.0; 3], vec![3.0, 1.0, 2.0]],
            "s",
            ClassLabel::Cn,
        )
        .unwrap();
        assert_eq!(m.degenerate, vec![1]);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 1), 1.0);
        m.check_invariants().unwrap();
    }

    #[test]
    fn labels_parse() {
        assert_eq!("ad".parse::<ClassLabel>().unwrap(), ClassLabel::Ad);
        assert_eq!(ClassLabel::Mci.to_string(), "MCI");
        assert!("XX".parse::<ClassLabel>().is_err());
    }
}
