//! Multi-band raster container, radiometric normalization and patch handling.
//!
//! Samples are stored band-sequential: all of band 0 in row-major order, then
//! band 1, and so on. Every stage of the pipeline exchanges [`Raster`] values.

mod io;
pub(crate) mod patches;

pub use io::{load_raster, read_pgm, read_ppm, save_raster, write_pgm, write_ppm, BsqHeader};
pub use patches::{
    extract_patches, patches_at, reflect_index, sample_positions, sample_training_patches,
    PatchSet,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "raster dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} raster needs {expected} samples, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
    }

    /// Builds a raster from per-pixel vectors (pixel-interleaved, `channels` values each).
    pub fn from_pixels(height: usize, width: usize, channels: usize, pixels: &[f64]) -> Result<Self> {
        if pixels.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "expected {} interleaved samples, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        let plane = height * width;
        let mut data = vec![0.0; plane * channels];
        for (px, chunk) in pixels.chunks_exact(channels).enumerate() {
            for (b, &v) in chunk.iter().enumerate() {
                data[b * plane + px] = v;
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Band-sequential sample buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[band * self.height * self.width + row * self.width + col]
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[band * plane..(band + 1) * plane]
    }

    /// Spectral vector of one pixel, by linear pixel index.
    pub fn pixel(&self, index: usize) -> Vec<f64> {
        let plane = self.height * self.width;
        (0..self.channels).map(|b| self.data[b * plane + index]).collect()
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.shape() == other.shape()
    }
}

/// Per-band z-score standardization with the population standard deviation.
///
/// Fails with [`Error::ConstantBand`] when a band has no variance.
pub fn zscore_normalize(raster: &Raster) -> Result<Raster> {
    let plane = raster.pixels();
    let mut data = Vec::with_capacity(raster.data.len());
    for b in 0..raster.channels {
        let band = raster.band(b);
        let mean = band.iter().sum::<f64>() / plane as f64;
        let var = band.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / plane as f64;
        let sd = var.sqrt();
        if !(sd > f64::EPSILON * mean.abs().max(1.0)) {
            return Err(Error::ConstantBand { band: b });
        }
        data.extend(band.iter().map(|v| (v - mean) / sd));
    }
    Raster::new(raster.height, raster.width, raster.channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_wrong_length() {
        assert!(Raster::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Raster::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Raster::new(1, 2, 1, vec![1.0, f64::NAN]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn zscore_three_values() {
        let r = Raster::new(1, 3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let z = zscore_normalize(&r).unwrap();
        let s = 1.5f64.sqrt();
        assert_abs_diff_eq!(z.data()[0], -s, epsilon = 1e-12);
        assert_abs_diff_eq!(z.data()[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.data()[2], s, epsilon = 1e-12);
    }

    #[test]
    fn zscore_fixed_point() {
        let s = 1.5f64.sqrt();
        let r = Raster::new(1, 3, 1, vec![-s, 0.0, s]).unwrap();
        let z = zscore_normalize(&r).unwrap();
        for (a, b) in z.data().iter().zip(r.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn zscore_constant_band_named() {
        let r = Raster::new(1, 3, 2, vec![1.0, 2.0, 4.0, 5.0, 5.0, 5.0]).unwrap();
        match zscore_normalize(&r) {
            Err(Error::ConstantBand { band }) => assert_eq!(band, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn from_pixels_reorders_to_bsq() {
        let r = Raster::from_pixels(1, 2, 3, &[255.0, 0.0, 0.0, 0.0, 255.0, 0.0]).unwrap();
        assert_eq!(r.data(), &[255.0, 0.0, 0.0, 255.0, 0.0, 0.0]);
        assert_eq!(r.pixel(1), vec![0.0, 255.0, 0.0]);
    }
}
