//! Cohort manifests: `manifest.csv` with a `subject_id,label,file` header and
//! file paths relative to the manifest's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::ClassLabel;

pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub label: ClassLabel,
    pub file: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn push(&mut self, subject_id: impl Into<String>, label: ClassLabel, file: impl Into<String>) {
        self.entries.push(ManifestEntry {
            subject_id: subject_id.into(),
            label,
            file: file.into(),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut s = String::from("subject_id,label,file\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{}", e.subject_id, e.label, e.file);
        }
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads `dir/manifest.csv`, or `dir` itself when it names a file.
    pub fn load(dir_or_file: &Path) -> Result<(Self, PathBuf)> {
        let (path, base) = if dir_or_file.is_dir() {
            (dir_or_file.join(MANIFEST_NAME), dir_or_file.to_path_buf())
        } else {
            let base = dir_or_file.parent().map(Path::to_path_buf).unwrap_or_default();
            (dir_or_file.to_path_buf(), base)
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::parse(
                    format!("{} line {}", path.display(), i + 1),
                    "expected subject_id,label,file",
                ));
            }
            m.push(f[0], f[1].parse()?, f[2]);
        }
        Ok((m, base))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::default();
        m.push("sub-0001", ClassLabel::Cn, "sub-0001.csv");
        m.push("sub-0002", ClassLabel::Ad, "sub-0002.csv");
        m.write(dir.path()).unwrap();
        let (back, base) = Manifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(base, dir.path());
    }
}
