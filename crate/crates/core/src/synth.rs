//! Planted-change synthetic scene generator.
//!
//! Time 1 is a smooth multi-band background plus texture and sensor noise.
//! Time 2 applies a per-band radiometric gain and offset, adds a spectral
//! shift inside each change region, draws fresh noise, and saturates a few
//! small "over-exposed" patches outside the change regions. The reference map
//! marks change regions by class and leaves a ring of undefined pixels at the
//! border.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ReferenceMap;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Rect {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    Disk {
        row: usize,
        col: usize,
        radius: usize,
    },
}

impl Shape {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        match *self {
            Shape::Rect {
                row,
                col,
                height,
                width,
            } => r >= row && r < row + height && c >= col && c < col + width,
            Shape::Disk { row, col, radius } => {
                let dr = r as f64 - row as f64;
                let dc = c as f64 - col as f64;
                dr * dr + dc * dc <= (radius * radius) as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Change class, `1..=classes`.
    pub class: u32,
    #[serde(flatten)]
    pub shape: Shape,
}

/// Rectangle of a different land cover in the background of both dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parcel {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    /// Per-band offset from the base material.
    pub material: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: u32,
    pub regions: Vec<Region>,
    #[serde(default)]
    pub parcels: Vec<Parcel>,
    /// One spectral shift vector per class.
    pub shifts: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    /// Per-pixel texture shared by both dates.
    pub texture_sigma: f64,
    /// Per-band gain applied to time 2.
    pub gain: Vec<f64>,
    /// Per-band offset applied to time 2.
    pub offset: Vec<f64>,
    /// Fraction of pixels covered by saturated patches in time 2.
    pub overexposure_fraction: f64,
    /// Width of the undefined ring in the reference map.
    pub border: usize,
    pub seed: u64,
}

/// Generated rasters and their planted truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub t1: Raster,
    pub t2: Raster,
    pub reference: ReferenceMap,
    /// Pixels saturated in time 2 (row-major mask).
    pub overexposed: Vec<bool>,
}

const MATERIALS: [[f64; 4]; 3] = [
    [0.40, 0.35, 0.40, 0.30],
    [-0.30, -0.35, -0.30, -0.20],
    [0.20, 0.15, 0.25, 0.35],
];

const DEFAULT_SHIFTS: [[f64; 4]; 4] = [
    [0.30, 0.25, 0.20, 0.30],
    [-0.30, -0.15, -0.30, -0.05],
    [0.25, -0.25, 0.25, -0.25],
    [-0.05, 0.30, -0.25, 0.10],
];

impl Default for SynthSpec {
    fn default() -> Self {
        Self::with_layout(96, 96, 4, 3, 0)
    }
}

impl SynthSpec {
    /// A scene with `classes` change classes, two regions per class (one
    /// rectangle, one disk) placed in disjoint cells with seeded jitter.
    pub fn with_layout(height: usize, width: usize, bands: usize, classes: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a70);
        let cells = 2 * classes as usize;
        let grid = (1..).find(|g| g * g > cells).unwrap();
        let (ch, cw) = (height / grid, width / grid);
        let mut cell_ids: Vec<usize> = (0..grid * grid).collect();
        // deterministic shuffle
        for i in (1..cell_ids.len()).rev() {
            let j = rng.random_range(0..=i);
            cell_ids.swap(i, j);
        }
        let mut regions = Vec::with_capacity(cells);
        for (n, &cell) in cell_ids.iter().take(cells).enumerate() {
            let (gr, gc) = (cell / grid, cell % grid);
            let class = (n / 2) as u32 + 1;
            let (r0, c0) = (gr * ch, gc * cw);
            let shape = if n % 2 == 0 {
                let hh = (3 * ch / 5).max(1) + rng.random_range(0..=ch / 6);
                let ww = (3 * cw / 5).max(1) + rng.random_range(0..=cw / 6);
                let row = r0 + rng.random_range(1..=(ch - hh).max(2) - 1);
                let col = c0 + rng.random_range(1..=(cw - ww).max(2) - 1);
                Shape::Rect {
                    row,
                    col,
                    height: hh,
                    width: ww,
                }
            } else {
                let radius = (ch.min(cw) / 3).max(1) + rng.random_range(0..=ch.min(cw) / 16);
                let slack = ch.min(cw).saturating_sub(2 * radius + 2).max(1);
                Shape::Disk {
                    row: r0 + radius + 1 + rng.random_range(0..slack),
                    col: c0 + radius + 1 + rng.random_range(0..slack),
                    radius,
                }
            };
            regions.push(Region { class, shape });
        }
        let parcels = cell_ids
            .iter()
            .skip(cells)
            .enumerate()
            .map(|(n, &cell)| {
                let base = MATERIALS[n % MATERIALS.len()];
                Parcel {
                    row: (cell / grid) * ch,
                    col: (cell % grid) * cw,
                    height: ch,
                    width: cw,
                    material: (0..bands).map(|b| base[b % 4]).collect(),
                }
            })
            .collect();
        let shifts = (0..classes as usize)
            .map(|c| {
                let base = DEFAULT_SHIFTS[c % DEFAULT_SHIFTS.len()];
                (0..bands).map(|b| base[b % 4]).collect()
            })
            .collect();
        Self {
            height,
            width,
            bands,
            classes,
            regions,
            parcels,
            shifts,
            noise_sigma: 0.02,
            texture_sigma: 0.08,
            gain: (0..bands).map(|b| 1.15 + 0.05 * b as f64).collect(),
            offset: (0..bands).map(|b| 0.1 - 0.03 * b as f64).collect(),
            overexposure_fraction: 0.005,
            border: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(Error::Config("scene dimensions must be positive".into()));
        }
        if self.shifts.len() != self.classes as usize {
            return Err(Error::Config(format!(
                "{} shift vectors for {} classes",
                self.shifts.len(),
                self.classes
            )));
        }
        if self.shifts.iter().any(|s| s.len() != self.bands) {
            return Err(Error::Config("shift vectors must have one entry per band".into()));
        }
        if self.gain.len() != self.bands || self.offset.len() != self.bands {
            return Err(Error::Config("gain and offset need one entry per band".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(0.0..0.5).contains(&self.overexposure_fraction) {
            return Err(Error::Config("noise sigma or over-exposure fraction out of range".into()));
        }
        for (i, a) in self.shifts.iter().enumerate() {
            let na = norm(a);
            if na == 0.0 {
                return Err(Error::Config(format!("class {} has a zero shift", i + 1)));
            }
            for (j, b) in self.shifts.iter().enumerate().skip(i + 1) {
                let cos = dot(a, b) / (na * norm(b));
                if cos.abs() > 1.0 - 1e-9 {
                    return Err(Error::Config(format!(
                        "shift vectors of classes {} and {} are parallel",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if self.parcels.iter().any(|p| p.material.len() != self.bands) {
            return Err(Error::Config("parcel materials need one entry per band".into()));
        }
        for r in &self.regions {
            if r.class == 0 || r.class > self.classes {
                return Err(Error::Config(format!("region class {} out of range", r.class)));
            }
        }
        let mut owner = vec![None::<usize>; self.height * self.width];
        for (k, reg) in self.regions.iter().enumerate() {
            for row in 0..self.height {
                for col in 0..self.width {
                    if reg.shape.contains(row, col) {
                        let slot = &mut owner[row * self.width + col];
                        if let Some(other) = *slot {
                            return Err(Error::Config(format!(
                                "regions {other} and {k} overlap at ({row}, {col})"
                            )));
                        }
                        *slot = Some(k);
                    }
                }
            }
        }
        Ok(())
    }

    /// Change class of every pixel (0 outside all regions), row-major.
    pub fn truth(&self) -> Vec<u32> {
        let mut labels = vec![0; self.height * self.width];
        for reg in &self.regions {
            for row in 0..self.height {
                for col in 0..self.width {
                    if reg.shape.contains(row, col) {
                        labels[row * self.width + col] = reg.class;
                    }
                }
            }
        }
        labels
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Wave {
    fy: f64,
    fx: f64,
    phase: f64,
    amp: f64,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthScene> {
    spec.validate()?;
    let (h, w, c) = (spec.height, spec.width, spec.bands);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let plane = h * w;

    // shared structure, mixed into every band with band-specific weights
    let waves: Vec<Wave> = (0..6)
        .map(|_| Wave {
            fy: rng.random_range(0.5..4.0) / h as f64,
            fx: rng.random_range(0.5..4.0) / w as f64,
            phase: rng.random_range(0.0..TAU),
            amp: rng.random_range(0.01..0.03),
        })
        .collect();
    let mix: Vec<Vec<f64>> = (0..c)
        .map(|_| waves.iter().map(|_| rng.random_range(0.3..1.0)).collect())
        .collect();
    let texture = Normal::new(0.0, spec.texture_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let tex: Vec<f64> = (0..plane).map(|_| texture.sample(&mut rng)).collect();

    let mut background = vec![0.0; plane * c];
    for b in 0..c {
        let base = 0.5 + 0.05 * b as f64;
        for row in 0..h {
            for col in 0..w {
                let mut v = base + tex[row * w + col] * (1.0 + 0.2 * b as f64);
                for (wave, m) in waves.iter().zip(&mix[b]) {
                    v += m * wave.amp * (TAU * (wave.fy * row as f64 + wave.fx * col as f64) + wave.phase).sin();
                }
                background[b * plane + row * w + col] = v;
            }
        }
    }

    for p in &spec.parcels {
        for row in p.row..(p.row + p.height).min(h) {
            for col in p.col..(p.col + p.width).min(w) {
                for (b, m) in p.material.iter().enumerate() {
                    background[b * plane + row * w + col] += m;
                }
            }
        }
    }

    let truth = spec.truth();

    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut t1 = background.clone();
    for v in t1.iter_mut() {
        *v += noise.sample(&mut rng);
    }
    let mut t2 = vec![0.0; plane * c];
    for b in 0..c {
        for px in 0..plane {
            let mut v = spec.gain[b] * background[b * plane + px] + spec.offset[b];
            if truth[px] > 0 {
                v += spec.shifts[truth[px] as usize - 1][b];
            }
            t2[b * plane + px] = v + noise.sample(&mut rng);
        }
    }

    // saturated patches outside change regions
    let mut overexposed = vec![false; plane];
    let target = (spec.overexposure_fraction * plane as f64).round() as usize;
    let side = 5.min(h).min(w);
    let mut covered = 0;
    let mut attempts = 0;
    while covered < target && attempts < 10_000 {
        attempts += 1;
        let r0 = rng.random_range(0..=h - side);
        let c0 = rng.random_range(0..=w - side);
        let clear = (r0..r0 + side)
            .all(|r| (c0..c0 + side).all(|cc| truth[r * w + cc] == 0 && !overexposed[r * w + cc]));
        if !clear {
            continue;
        }
        for r in r0..r0 + side {
            for cc in c0..c0 + side {
                overexposed[r * w + cc] = true;
                covered += 1;
            }
        }
    }
    for b in 0..c {
        let band = &mut t2[b * plane..(b + 1) * plane];
        let mut sorted = band.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ceiling = sorted[(0.99 * (plane - 1) as f64) as usize];
        for (v, &o) in band.iter_mut().zip(&overexposed) {
            if o {
                *v = (*v * 1.25).min(ceiling);
            }
        }
    }

    let mut labels: Vec<i32> = truth.iter().map(|&l| l as i32).collect();
    for row in 0..h {
        for col in 0..w {
            if row < spec.border || col < spec.border || row + spec.border >= h || col + spec.border >= w {
                labels[row * w + col] = -1;
            }
        }
    }
    Ok(SynthScene {
        t1: Raster::new(h, w, c, t1)?,
        t2: Raster::new(h, w, c, t2)?,
        reference: ReferenceMap::new(h, w, labels, spec.classes)?,
        overexposed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_valid() {
        for seed in 0..10 {
            let spec = SynthSpec::with_layout(96, 96, 4, 3, seed);
            spec.validate().unwrap();
            assert_eq!(spec.regions.len(), 6);
        }
    }

    #[test]
    fn no_classes_means_no_change() {
        let mut spec = SynthSpec::with_layout(32, 32, 3, 0, 1);
        spec.overexposure_fraction = 0.0;
        let scene = generate(&spec).unwrap();
        assert!(scene.reference.labels.iter().all(|&l| l <= 0));
    }

    #[test]
    fn single_rectangle_area() {
        let mut spec = SynthSpec::with_layout(20, 30, 2, 1, 3);
        spec.border = 0;
        spec.regions = vec![Region {
            class: 1,
            shape: Shape::Rect {
                row: 4,
                col: 5,
                height: 6,
                width: 7,
            },
        }];
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.reference.labels.iter().filter(|&&l| l == 1).count(), 42);
    }

    #[test]
    fn orthogonal_shifts_separate_by_their_angle() {
        use crate::change::cva_baseline;
        let mut spec = SynthSpec::with_layout(40, 40, 4, 2, 9);
        spec.shifts = vec![vec![0.4, 0.4, 0.0, 0.0], vec![0.4, -0.4, 0.0, 0.0]];
        spec.gain = vec![1.0; 4];
        spec.offset = vec![0.0; 4];
        spec.noise_sigma = 0.01;
        spec.overexposure_fraction = 0.0;
        let scene = generate(&spec).unwrap();
        let field = cva_baseline(&scene.t1, &scene.t2).unwrap();
        let median_theta = |class: i32| {
            let mut t: Vec<f64> = scene
                .reference
                .labels
                .iter()
                .zip(&field.theta)
                .filter(|(&l, _)| l == class)
                .map(|(_, &t)| t)
                .collect();
            t.sort_by(f64::total_cmp);
            t[t.len() / 2]
        };
        // D = t1 - t2 = -shift; cos(theta) = sum(D) / (sqrt(4) |D|)
        let expected = |s: &[f64]| {
            let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            (-s.iter().sum::<f64>() / (2.0 * n)).acos()
        };
        let (e1, e2) = (expected(&spec.shifts[0]), expected(&spec.shifts[1]));
        let (t1, t2) = (median_theta(1), median_theta(2));
        assert!((t1 - e1).abs() < 0.02, "{t1} vs {e1}");
        assert!((t2 - e2).abs() < 0.02, "{t2} vs {e2}");
        assert!(((t1 - t2).abs() - (e1 - e2).abs()).abs() < 0.03);
    }

    #[test]
    fn overlap_and_parallel_shifts_rejected() {
        let mut spec = SynthSpec::with_layout(40, 40, 2, 2, 0);
        let r = Region {
            class: 1,
            shape: Shape::Disk {
                row: 10,
                col: 10,
                radius: 4,
            },
        };
        spec.regions = vec![r, r];
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
        let mut spec = SynthSpec::with_layout(40, 40, 2, 2, 0);
        spec.shifts = vec![vec![1.0, 2.0], vec![-0.5, -1.0]];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn border_ring_is_undefined() {
        let scene = generate(&SynthSpec::with_layout(24, 24, 2, 1, 5)).unwrap();
        let r = &scene.reference;
        assert_eq!(r.labels[0], -1);
        assert_eq!(r.labels[24 + 1], -1);
        assert!(r.labels[2 * 24 + 2] >= 0);
    }

    #[test]
    fn seeded() {
        let spec = SynthSpec::with_layout(32, 32, 3, 2, 9);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
