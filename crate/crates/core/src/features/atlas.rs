use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hilbert::Coord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub id: u32,
    pub name: String,
    pub seed: Coord,
}

/// Ordered list of region seeds inside the curve cube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedAtlas {
    regions: Vec<Region>,
}

impl SeedAtlas {
    /// Validates and sorts regions by id.
    pub fn new(mut regions: Vec<Region>, cube_side: usize) -> Result<Self> {
        if regions.len() < 2 {
            return Err(Error::Config(format!(
                "an atlas needs at least 2 regions, got {}",
                regions.len()
            )));
        }
        let mut seen = HashSet::new();
        for r in &regions {
            if !seen.insert(r.id) {
                return Err(Error::parse("id", format!("duplicate region id {}", r.id)));
            }
            if r.seed.iter().any(|&c| c >= cube_side) {
                return Err(Error::Bounds(format!(
                    "seed of region {} at {:?} lies outside the cube of side {cube_side}",
                    r.id, r.seed
                )));
            }
        }
        regions.sort_by_key(|r| r.id);
        Ok(SeedAtlas { regions })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("id,name,x,y,z\n");
        for r in &self.regions {
            let _ = writeln!(s, "{},{},{},{},{}", r.id, r.name, r.seed[0], r.seed[1], r.seed[2]);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parses `id, name, x, y, z` records separated by tabs or commas. A header
/// line, blank lines and `#` comments are skipped.
pub fn parse_seed_atlas(text: &str, cube_side: usize) -> Result<SeedAtlas> {
    let mut regions: Vec<Region> = Vec::new();
    let mut line_numbers: Vec<usize> = Vec::new();
    let mut first_record = true;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split([',', '\t'])
            .map(str::trim)
            .collect();
        if std::mem::take(&mut first_record) && fields[0].parse::<u32>().is_err() {
            // header
            continue;
        }
        let bad = |what: &str| Error::parse(format!("line {lineno}"), what.to_string());
        if fields.len() != 5 {
            return Err(bad(&format!("expected 5 fields, found {}", fields.len())));
        }
        let id: u32 = fields[0].parse().map_err(|_| bad("region id is not a non-negative integer"))?;
        let mut seed = [0usize; 3];
        for (i, c) in seed.iter_mut().enumerate() {
            let v: i64 = fields[2 + i]
                .parse()
                .map_err(|_| bad(&format!("coordinate {:?} is not an integer", fields[2 + i])))?;
            if v < 0 || v as usize >= cube_side {
                return Err(Error::Bounds(format!(
                    "line {lineno}: coordinate {v} of region {id} outside [0, {cube_side})"
                )));
            }
            *c = v as usize;
        }
        if let Some(prev) = regions.iter().position(|r| r.id == id) {
            return Err(Error::parse(
                format!("line {lineno}"),
                format!("duplicate region id {id} (first defined on line {})", line_numbers[prev]),
            ));
        }
        line_numbers.push(lineno);
        regions.push(Region {
            id,
            name: fields[1].to_string(),
            seed,
        });
    }
    SeedAtlas::new(regions, cube_side)
}

pub fn load_seed_atlas(path: &Path, cube_side: usize) -> Result<SeedAtlas> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_seed_atlas(&text, cube_side)
}
