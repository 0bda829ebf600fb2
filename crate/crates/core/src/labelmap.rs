//! PGM + JSON legend encoding for change maps and reference maps.
//!
//! Change labels are written as gray `label * floor(255 / K)` (so a binary map
//! is 0/255). Undefined reference pixels use gray [`UNDEFINED_GRAY`]. The
//! legend records both the class names and the gray-to-label mapping.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ReferenceMap;
use crate::raster::{read_pgm, write_pgm};
use crate::segment::ChangeMap;

pub const UNDEFINED_GRAY: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Legend {
    /// Label -> class name.
    pub labels: BTreeMap<i32, String>,
    /// Gray level -> label.
    pub gray_levels: BTreeMap<u16, i32>,
}

fn class_name(label: i32) -> String {
    match label {
        -1 => "undefined".into(),
        0 => "non-change".into(),
        l => format!("change-{l}"),
    }
}

pub fn gray_step(classes: u32) -> u32 {
    255 / classes.max(1)
}

impl Legend {
    /// Legend for a `classes`-class map, optionally with an undefined level.
    pub fn for_classes(classes: u32, with_undefined: bool) -> Self {
        let step = gray_step(classes);
        let mut labels = BTreeMap::new();
        let mut gray_levels = BTreeMap::new();
        for l in 0..=classes {
            labels.insert(l as i32, class_name(l as i32));
            gray_levels.insert((l * step) as u16, l as i32);
        }
        if with_undefined {
            labels.insert(-1, class_name(-1));
            gray_levels.insert(UNDEFINED_GRAY as u16, -1);
        }
        Self {
            labels,
            gray_levels,
        }
    }

    pub fn classes(&self) -> u32 {
        self.labels.keys().copied().max().unwrap_or(0).max(0) as u32
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Without a legend: gray 0 is non-change, gray 128 undefined, and the
    /// remaining distinct levels are change classes in ascending gray order.
    pub fn infer(gray: &[u16]) -> Self {
        let mut levels: Vec<u16> = gray.to_vec();
        levels.sort_unstable();
        levels.dedup();
        let mut gray_levels = BTreeMap::new();
        let mut labels = BTreeMap::new();
        labels.insert(0, class_name(0));
        gray_levels.insert(0, 0);
        let mut next = 1;
        for g in levels {
            if g == 0 {
                continue;
            }
            if g == UNDEFINED_GRAY as u16 {
                gray_levels.insert(g, -1);
                labels.insert(-1, class_name(-1));
                continue;
            }
            gray_levels.insert(g, next);
            labels.insert(next, class_name(next));
            next += 1;
        }
        Self {
            labels,
            gray_levels,
        }
    }

    fn decode(&self, gray: &[u16]) -> Result<Vec<i32>> {
        gray.iter()
            .map(|g| {
                self.gray_levels
                    .get(g)
                    .copied()
                    .ok_or_else(|| Error::Format(format!("gray level {g} not in legend")))
            })
            .collect()
    }
}

pub fn change_map_gray(map: &ChangeMap) -> Vec<u8> {
    let step = gray_step(map.classes);
    map.labels.iter().map(|&l| (l * step) as u8).collect()
}

/// Writes the map as PGM and its legend as JSON.
pub fn write_change_map(map: &ChangeMap, pgm: &Path, legend: &Path) -> Result<()> {
    write_pgm(pgm, map.height, map.width, &change_map_gray(map))?;
    Legend::for_classes(map.classes, false).save(legend)
}

pub fn write_reference(map: &ReferenceMap, pgm: &Path, legend: &Path) -> Result<()> {
    let step = gray_step(map.classes);
    let gray: Vec<u8> = map
        .labels
        .iter()
        .map(|&l| if l < 0 { UNDEFINED_GRAY } else { (l as u32 * step) as u8 })
        .collect();
    write_pgm(pgm, map.height, map.width, &gray)?;
    Legend::for_classes(map.classes, true).save(legend)
}

fn read_labels(pgm: &Path, legend: Option<&Path>) -> Result<(usize, usize, Vec<i32>, Legend)> {
    let (h, w, gray) = read_pgm(pgm)?;
    let legend = match legend {
        Some(p) => Legend::load(p)?,
        None => Legend::infer(&gray),
    };
    let labels = legend.decode(&gray)?;
    Ok((h, w, labels, legend))
}

pub fn read_reference(pgm: &Path, legend: Option<&Path>) -> Result<ReferenceMap> {
    let (h, w, labels, legend) = read_labels(pgm, legend)?;
    ReferenceMap::new(h, w, labels, legend.classes())
}

pub fn read_change_map(pgm: &Path, legend: Option<&Path>) -> Result<ChangeMap> {
    let (h, w, labels, legend) = read_labels(pgm, legend)?;
    if labels.iter().any(|&l| l < 0) {
        return Err(Error::Format(format!(
            "{}: predicted maps cannot contain undefined pixels",
            pgm.display()
        )));
    }
    ChangeMap::new(h, w, labels.into_iter().map(|l| l as u32).collect(), legend.classes().max(1))
}
