//! Feature differences and their polar (magnitude, direction) representation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Direction assigned to pixels whose difference vector is exactly zero.
pub const ZERO_DIRECTION: f64 = std::f64::consts::FRAC_PI_2;

/// `F1 - F2` with the eigenvalue paired to each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMap {
    values: Raster,
    eigenvalues: Vec<f64>,
}

impl DifferenceMap {
    pub fn new(values: Raster, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != values.channels() {
            return Err(Error::Shape(format!(
                "{} eigenvalues for {} channels",
                eigenvalues.len(),
                values.channels()
            )));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter("channel eigenvalues must be positive".into()));
        }
        Ok(Self {
            values,
            eigenvalues,
        })
    }

    pub fn values(&self) -> &Raster {
        &self.values
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn channels(&self) -> usize {
        self.values.channels()
    }

    /// Difference vectors in pixel-interleaved order (`pixels x channels`).
    pub fn pixel_vectors(&self) -> Vec<f64> {
        let (n, c) = (self.values.pixels(), self.channels());
        let mut out = vec![0.0; n * c];
        for b in 0..c {
            for (px, &v) in self.values.band(b).iter().enumerate() {
                out[px * c + b] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub height: usize,
    pub width: usize,
    /// Magnitude, row-major.
    pub rho: Vec<f64>,
    /// Direction in `[0, pi]`, row-major.
    pub theta: Vec<f64>,
}

impl PolarField {
    /// CSV with header `row,col,rho,theta`, one line per pixel.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rho.len() * 48);
        s.push_str("row,col,rho,theta\n");
        for (i, (r, t)) in self.rho.iter().zip(&self.theta).enumerate() {
            let _ = writeln!(s, "{},{},{},{}", i / self.width, i % self.width, r, t);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn difference(f1: &Raster, f2: &Raster, eigenvalues: &[f64]) -> Result<DifferenceMap> {
    if !f1.same_shape(f2) {
        return Err(Error::Shape(format!(
            "feature maps differ: {:?} vs {:?}",
            f1.shape(),
            f2.shape()
        )));
    }
    let data = f1.data().iter().zip(f2.data()).map(|(a, b)| a - b).collect();
    let (h, w, c) = f1.shape();
    DifferenceMap::new(Raster::new(h, w, c, data)?, eigenvalues.to_vec())
}

/// Per-pixel Euclidean norm of the difference vector.
pub fn feature_magnitude(d: &DifferenceMap) -> Vec<f64> {
    let n = d.values.pixels();
    let mut acc = vec![0.0; n];
    for b in 0..d.channels() {
        for (a, &v) in acc.iter_mut().zip(d.values.band(b)) {
            *a += v * v;
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// Angle between each difference vector and a weight vector over the chosen
/// channels, `arccos(w.D / (|w| |D|))`, with the zero-vector sentinel.
fn weighted_direction(d: &DifferenceMap, channels: &[usize], weights: &[f64]) -> Vec<f64> {
    let wnorm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let n = d.values.pixels();
    let mut num = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (&b, &w) in channels.iter().zip(weights) {
        for ((nu, s), &v) in num.iter_mut().zip(sq.iter_mut()).zip(d.values.band(b)) {
            *nu += w * v;
            *s += v * v;
        }
    }
    num.into_iter()
        .zip(sq)
        .map(|(nu, s)| {
            if s == 0.0 {
                ZERO_DIRECTION
            } else {
                (nu / (wnorm * s.sqrt())).clamp(-1.0, 1.0).acos()
            }
        })
        .collect()
}

/// Direction against an arbitrary non-zero weight vector over all channels.
pub fn direction_with_weights(d: &DifferenceMap, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != d.channels() {
        return Err(Error::Shape(format!(
            "{} weights for {} channels",
            weights.len(),
            d.channels()
        )));
    }
    if weights.iter().all(|&w| w == 0.0) || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter("direction weights must be finite and not all zero".into()));
    }
    let channels: Vec<usize> = (0..d.channels()).collect();
    Ok(weighted_direction(d, &channels, weights))
}

/// Eigenvalue-weighted direction over all channels.
pub fn weighted_feature_direction(d: &DifferenceMap) -> Vec<f64> {
    let channels: Vec<usize> = (0..d.channels()).collect();
    weighted_direction(d, &channels, &d.eigenvalues)
}

/// Direction of the 2-vector formed by the two largest-eigenvalue channels,
/// folded into `[0, pi]`.
pub fn direction_m3(d: &DifferenceMap) -> Result<Vec<f64>> {
    if d.channels() < 2 {
        return Err(Error::InvalidParameter(
            "two-channel direction needs at least 2 channels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..d.channels()).collect();
    // stable: equal eigenvalues keep channel order
    order.sort_by(|&a, &b| d.eigenvalues[b].total_cmp(&d.eigenvalues[a]));
    Ok(weighted_direction(d, &order[..2], &[1.0, 0.0]))
}

/// Unweighted direction over all channels.
pub fn direction_m4(d: &DifferenceMap) -> Vec<f64> {
    let channels: Vec<usize> = (0..d.channels()).collect();
    weighted_direction(d, &channels, &vec![1.0; d.channels()])
}

/// Polar field from a difference map and a direction operator's output.
pub fn polar(d: &DifferenceMap, theta: Vec<f64>) -> PolarField {
    PolarField {
        height: d.height(),
        width: d.width(),
        rho: feature_magnitude(d),
        theta,
    }
}

/// Magnitude and unweighted direction of the raw band difference.
pub fn cva_baseline(t1: &Raster, t2: &Raster) -> Result<PolarField> {
    let d = difference(t1, t2, &vec![1.0; t1.channels()])?;
    let theta = direction_m4(&d);
    Ok(polar(&d, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn one_pixel(d: &[f64], eig: &[f64]) -> DifferenceMap {
        DifferenceMap::new(Raster::new(1, 1, d.len(), d.to_vec()).unwrap(), eig.to_vec()).unwrap()
    }

    #[test]
    fn difference_basics() {
        let a = Raster::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = Raster::zeros(1, 2, 2).unwrap();
        let e = [1.0, 1.0];
        assert!(difference(&a, &a, &e).unwrap().values().data().iter().all(|&v| v == 0.0));
        assert_eq!(difference(&a, &z, &e).unwrap().values(), &a);
        let ab = difference(&a, &z, &e).unwrap();
        let ba = difference(&z, &a, &e).unwrap();
        for (x, y) in ab.values().data().iter().zip(ba.values().data()) {
            assert_eq!(*x, -y);
        }
        let other = Raster::zeros(2, 1, 2).unwrap();
        assert!(difference(&a, &other, &e).is_err());
        assert!(difference(&a, &z, &[1.0]).is_err());
    }

    #[test]
    fn magnitude() {
        assert_eq!(feature_magnitude(&one_pixel(&[3.0, 4.0], &[1.0, 1.0])), vec![5.0]);
        assert_eq!(feature_magnitude(&one_pixel(&[0.0, 0.0], &[1.0, 1.0])), vec![0.0]);
    }

    #[test]
    fn weighted_direction_cases() {
        let unit = [1.0, 1.0];
        let t = direction_with_weights(&one_pixel(&[1.0, 0.0], &unit), &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-12);
        let t = weighted_feature_direction(&one_pixel(&[1.0, -1.0], &[1.0, 1.0]));
        assert_abs_diff_eq!(t[0], FRAC_PI_2, epsilon = 1e-12);
        let t = direction_with_weights(&one_pixel(&[-1.0, 0.0], &unit), &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(t[0], PI, epsilon = 1e-12);
        assert!(direction_with_weights(&one_pixel(&[1.0, 0.0], &unit), &[0.0, 0.0]).is_err());
        assert!(direction_with_weights(&one_pixel(&[1.0, 0.0], &unit), &[1.0]).is_err());
        let t = weighted_feature_direction(&one_pixel(&[0.0, 0.0], &[2.0, 1.0]));
        assert_eq!(t[0], ZERO_DIRECTION);
    }

    #[test]
    fn two_channel_direction() {
        let t = direction_m3(&one_pixel(&[1.0, 0.0, 5.0], &[3.0, 2.0, 1.0])).unwrap();
        assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-15);
        let t = direction_m3(&one_pixel(&[0.0, 1.0, 5.0], &[3.0, 2.0, 1.0])).unwrap();
        assert_abs_diff_eq!(t[0], FRAC_PI_2, epsilon = 1e-15);
        // channels selected by eigenvalue, not position
        let t = direction_m3(&one_pixel(&[7.0, -1.0, 0.0], &[1.0, 3.0, 2.0])).unwrap();
        assert_abs_diff_eq!(t[0], PI, epsilon = 1e-15);
        assert!(direction_m3(&one_pixel(&[1.0], &[1.0])).is_err());
    }

    #[test]
    fn unweighted_direction_cases() {
        let t = direction_m4(&one_pixel(&[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]));
        assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-7);
        let t = direction_m4(&one_pixel(&[2.0, -0.5, -1.5], &[3.0, 2.0, 1.0]));
        assert_abs_diff_eq!(t[0], FRAC_PI_2, epsilon = 1e-15);
        let d = one_pixel(&[0.3, -1.1, 2.0], &[0.5, 0.5, 0.5]);
        assert_eq!(direction_m4(&d), weighted_feature_direction(&d));
    }

    #[test]
    fn cva_single_band_is_zero_or_pi() {
        let a = Raster::new(1, 3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let b = Raster::new(1, 3, 1, vec![0.0, 2.0, 4.0]).unwrap();
        let p = cva_baseline(&a, &b).unwrap();
        assert_eq!(p.rho, vec![1.0, 0.0, 1.0]);
        assert_eq!(p.theta, vec![0.0, ZERO_DIRECTION, PI]);
        assert!(cva_baseline(&a, &a).unwrap().rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn csv_layout() {
        let p = PolarField {
            height: 1,
            width: 2,
            rho: vec![1.5, 0.0],
            theta: vec![0.25, FRAC_PI_2],
        };
        let csv = p.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "row,col,rho,theta");
        assert_eq!(lines[1], "0,0,1.5,0.25");
        assert!(lines[2].starts_with("0,1,0,1.5707963"));
    }
}
