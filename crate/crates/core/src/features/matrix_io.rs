//! Correlation matrix files: `<subject>.csv` holds `size` rows of `size`
//! comma-separated values with 17 significant digits; `<subject>.meta` holds
//! `key=value` lines (`subject_id`, `label`, `size`, `half_length`,
//! `degenerate`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::correlation::CorrelationMatrix;
use crate::config::ConfigMap;
use crate::error::{Error, Result};

pub fn matrix_to_csv(m: &CorrelationMatrix) -> String {
    let mut s = String::with_capacity(m.size * m.size * 25);
    for row in m.values.chunks_exact(m.size) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.16e}");
        }
        s.push('\n');
    }
    s
}

fn metadata(m: &CorrelationMatrix) -> ConfigMap {
    let mut meta = ConfigMap::new();
    meta.set("subject_id", &m.subject_id);
    meta.set("label", m.label);
    meta.set("size", m.size);
    meta.set(
        "half_length",
        m.half_length.map_or_else(|| "none".to_string(), |h| h.to_string()),
    );
    meta.set(
        "degenerate",
        m.degenerate.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "),
    );
    meta
}

/// Writes `<dir>/<subject_id>.csv` and its `.meta` sidecar; returns the CSV path.
pub fn write_matrix(m: &CorrelationMatrix, dir: &Path) -> Result<PathBuf> {
    let csv = dir.join(format!("{}.csv", m.subject_id));
    std::fs::write(&csv, matrix_to_csv(m)).map_err(|e| Error::io(&csv, e))?;
    let meta = csv.with_extension("meta");
    std::fs::write(&meta, metadata(m).to_text()).map_err(|e| Error::io(&meta, e))?;
    Ok(csv)
}

pub fn read_matrix(csv: &Path) -> Result<CorrelationMatrix> {
    let meta_path = csv.with_extension("meta");
    let meta = ConfigMap::load(&meta_path)?;
    let text = std::fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    format!("{} line {}", csv.display(), lineno + 1),
                    format!("bad value {field:?}"),
                )
            })?;
            values.push(v);
        }
    }
    if values.len() != rows * rows {
        return Err(Error::parse(
            csv.display().to_string(),
            format!("{} values in {rows} rows is not square", values.len()),
        ));
    }
    let size: usize = meta.parse_or("size", rows)?;
    if size != rows {
        return Err(Error::parse("size", format!("metadata says {size}, file has {rows} rows")));
    }
    let half_length = match meta.get("half_length") {
        None | Some("none") => None,
        Some(h) => Some(h.parse().map_err(|_| Error::parse("half_length", h.to_string()))?),
    };
    let degenerate = meta
        .get("degenerate")
        .unwrap_or("")
        .split_whitespace()
        .map(|d| d.parse().map_err(|_| Error::parse("degenerate", d.to_string())))
        .collect::<Result<Vec<usize>>>()?;
    Ok(CorrelationMatrix {
        size,
        values,
        subject_id: meta.require("subject_id")?.to_string(),
        label: meta.require("label")?.parse()?,
        half_length,
        degenerate,
    })
}
