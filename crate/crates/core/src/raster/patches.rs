use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Raster;
use crate::error::{Error, Result};

/// Vectorized image patches, one per column.
///
/// A patch vector lists band 0 in row-major window order, then band 1, and so
/// on. Columns are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    patch_h: usize,
    patch_w: usize,
    channels: usize,
    count: usize,
    data: Vec<f64>,
    origins: Option<Vec<(usize, usize)>>,
}

impl PatchSet {
    /// Builds a patch set from contiguous column data.
    pub fn new(
        patch_h: usize,
        patch_w: usize,
        channels: usize,
        data: Vec<f64>,
        origins: Option<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let dim = patch_h * patch_w * channels;
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "patch data of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        let count = data.len() / dim;
        if let Some(o) = &origins {
            if o.len() != count {
                return Err(Error::Shape(format!(
                    "{} origins for {count} patches",
                    o.len()
                )));
            }
        }
        Ok(Self {
            patch_h,
            patch_w,
            channels,
            count,
            data,
            origins,
        })
    }

    /// Treats each vector as a 1x1 patch with `dim` channels.
    pub fn from_vectors(dim: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(1, 1, dim, data, None)
    }

    pub fn patch_h(&self) -> usize {
        self.patch_h
    }

    pub fn patch_w(&self) -> usize {
        self.patch_w
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dim(&self) -> usize {
        self.patch_h * self.patch_w * self.channels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.data[j * d..(j + 1) * d]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn origins(&self) -> Option<&[(usize, usize)]> {
        self.origins.as_deref()
    }

    fn same_geometry(&self, other: &PatchSet) -> bool {
        (self.patch_h, self.patch_w, self.channels) == (other.patch_h, other.patch_w, other.channels)
    }
}

/// Reflect-101 index folding (`-1 -> 1`, `n -> n-2`), repeated as needed.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

pub(crate) fn check_window(raster: &Raster, s1: usize, s2: usize) -> Result<()> {
    if s1 == 0 || s2 == 0 || s1.is_multiple_of(2) || s2.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "window {s1}x{s2} must have odd positive sides"
        )));
    }
    let limit = 2 * raster.height().min(raster.width()) + 1;
    if s1.max(s2) > limit {
        return Err(Error::InvalidParameter(format!(
            "window {s1}x{s2} too large for {}x{} raster",
            raster.height(),
            raster.width()
        )));
    }
    Ok(())
}

/// Writes the reflect-padded patch centred on `(row, col)` into `out`.
#[inline]
pub(crate) fn fill_patch(raster: &Raster, s1: usize, s2: usize, row: usize, col: usize, out: &mut [f64]) {
    let (h, w) = (raster.height(), raster.width());
    let (r1, r2) = ((s1 / 2) as isize, (s2 / 2) as isize);
    let mut k = 0;
    for b in 0..raster.channels() {
        let band = raster.band(b);
        for dr in -r1..=r1 {
            let rr = reflect_index(row as isize + dr, h);
            let line = &band[rr * w..(rr + 1) * w];
            for dc in -r2..=r2 {
                out[k] = line[reflect_index(col as isize + dc, w)];
                k += 1;
            }
        }
    }
}

/// One `s1 x s2` patch per pixel, reflect-padded at the borders.
pub fn extract_patches(raster: &Raster, s1: usize, s2: usize) -> Result<PatchSet> {
    check_window(raster, s1, s2)?;
    let positions: Vec<usize> = (0..raster.pixels()).collect();
    patches_at(raster, s1, s2, &positions)
}

/// Patches centred on the given linear pixel indices, in that order.
pub fn patches_at(raster: &Raster, s1: usize, s2: usize, positions: &[usize]) -> Result<PatchSet> {
    check_window(raster, s1, s2)?;
    let dim = s1 * s2 * raster.channels();
    let mut data = vec![0.0; dim * positions.len()];
    let mut origins = Vec::with_capacity(positions.len());
    for (&p, out) in positions.iter().zip(data.chunks_exact_mut(dim)) {
        if p >= raster.pixels() {
            return Err(Error::InvalidParameter(format!(
                "pixel index {p} outside {}x{} raster",
                raster.height(),
                raster.width()
            )));
        }
        let (row, col) = (p / raster.width(), p % raster.width());
        fill_patch(raster, s1, s2, row, col, out);
        origins.push((row, col));
    }
    PatchSet::new(s1, s2, raster.channels(), data, Some(origins))
}

/// Draws `n` distinct pixel indices out of `count`, sorted ascending.
pub fn sample_positions(count: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if n == 0 || n > count {
        return Err(Error::InvalidParameter(format!(
            "cannot sample {n} positions out of {count} pixels"
        )));
    }
    let mut picked = index::sample(rng, count, n).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Pools the time-1 and time-2 patches at `n` randomly chosen pixel positions.
///
/// Columns alternate time-1, time-2 for each selected position, giving `2n`
/// columns in total.
pub fn sample_training_patches(ps1: &PatchSet, ps2: &PatchSet, n: usize, seed: u64) -> Result<PatchSet> {
    if !ps1.same_geometry(ps2) || ps1.count != ps2.count {
        return Err(Error::Shape("temporal patch sets differ in geometry".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = sample_positions(ps1.count, n, &mut rng)?;
    Ok(pool_pairs(ps1, ps2, &positions))
}

pub(crate) fn pool_pairs(ps1: &PatchSet, ps2: &PatchSet, positions: &[usize]) -> PatchSet {
    let dim = ps1.dim();
    let mut data = Vec::with_capacity(2 * positions.len() * dim);
    let mut origins = Vec::with_capacity(2 * positions.len());
    for &p in positions {
        data.extend_from_slice(ps1.column(p));
        data.extend_from_slice(ps2.column(p));
        if let (Some(o1), Some(o2)) = (ps1.origins(), ps2.origins()) {
            origins.push(o1[p]);
            origins.push(o2[p]);
        }
    }
    let origins = (origins.len() == 2 * positions.len()).then_some(origins);
    PatchSet::new(ps1.patch_h, ps1.patch_w, ps1.channels, data, origins)
        .expect("pooled geometry matches its sources")
}
