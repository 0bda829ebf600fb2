//! Kernel functions, Gram matrices and Gram centering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::raster::PatchSet;

/// A fully parameterized kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    Polynomial { degree: u32, offset: f64 },
    Sigmoid { scale: f64, offset: f64 },
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    Polynomial,
    Sigmoid,
    Cosine,
}

/// Kernel choice with optional parameters; missing ones take data-driven or
/// fixed defaults when resolved against training patches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl KernelConfig {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            gamma: None,
            degree: None,
            offset: None,
            scale: None,
        }
    }

    pub fn rbf() -> Self {
        Self::new(KernelKind::Rbf)
    }

    pub fn linear() -> Self {
        Self::new(KernelKind::Linear)
    }

    /// Fills in defaults. RBF bandwidth defaults to `1 / (2 * median squared
    /// pairwise distance)` over `train`; polynomial to degree 3, offset 1;
    /// sigmoid to scale `1/dim`, offset 0.
    pub fn resolve(&self, train: &PatchSet) -> Result<KernelSpec> {
        let spec = match self.kind {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Cosine => KernelSpec::Cosine,
            KernelKind::Rbf => {
                let gamma = match self.gamma {
                    Some(g) => g,
                    None => {
                        let med = median_sq_distance(train);
                        if !(med > 0.0) {
                            return Err(Error::ConstantInput(
                                "all training patches coincide; RBF bandwidth undefined".into(),
                            ));
                        }
                        1.0 / (2.0 * med)
                    }
                };
                KernelSpec::Rbf { gamma }
            }
            KernelKind::Polynomial => KernelSpec::Polynomial {
                degree: self.degree.unwrap_or(3),
                offset: self.offset.unwrap_or(1.0),
            },
            KernelKind::Sigmoid => KernelSpec::Sigmoid {
                scale: self.scale.unwrap_or(1.0 / train.dim() as f64),
                offset: self.offset.unwrap_or(0.0),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if self.degree == Some(0) {
            return Err(Error::Config("polynomial degree must be positive".into()));
        }
        for v in [self.offset, self.scale].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Config("kernel parameters must be finite".into()));
            }
        }
        Ok(())
    }
}

impl From<KernelSpec> for KernelConfig {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Linear => Self::new(KernelKind::Linear),
            KernelSpec::Cosine => Self::new(KernelKind::Cosine),
            KernelSpec::Rbf { gamma } => Self {
                gamma: Some(gamma),
                ..Self::new(KernelKind::Rbf)
            },
            KernelSpec::Polynomial { degree, offset } => Self {
                degree: Some(degree),
                offset: Some(offset),
                ..Self::new(KernelKind::Polynomial)
            },
            KernelSpec::Sigmoid { scale, offset } => Self {
                scale: Some(scale),
                offset: Some(offset),
                ..Self::new(KernelKind::Sigmoid)
            },
        }
    }
}

fn median_sq_distance(train: &PatchSet) -> f64 {
    let m = train.count();
    let mut d: Vec<f64> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .map(|(i, j)| sq_distance(train.column(i), train.column(j)))
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    if d.len() % 2 == 1 {
        d[mid]
    } else {
        0.5 * (d[mid - 1] + d[mid])
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
fn sq_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                Error::InvalidParameter(format!("rbf gamma must be positive, got {gamma}")),
            ),
            KernelSpec::Polynomial { degree: 0, .. } => Err(Error::InvalidParameter(
                "polynomial degree must be positive".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { gamma } => (-gamma * sq_distance(x, y)).exp(),
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
            KernelSpec::Sigmoid { scale, offset } => (scale * dot(x, y) + offset).tanh(),
            KernelSpec::Cosine => {
                let nx = dot(x, x).sqrt();
                let ny = dot(y, y).sqrt();
                dot(x, y) / (nx * ny)
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    if matches!(spec, KernelSpec::Cosine) && (is_zero(x) || is_zero(y)) {
        return Err(Error::InvalidParameter(
            "cosine kernel is undefined for a zero vector".into(),
        ));
    }
    Ok(spec.eval_unchecked(x, y))
}

fn is_zero(x: &[f64]) -> bool {
    x.iter().all(|&v| v == 0.0)
}

/// Kernel matrix with a flag recording whether it has been centred.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: Matrix,
    pub centered: bool,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.values.rows()
    }

    /// Per-row means (equal to column means for a symmetric matrix).
    pub fn row_means(&self) -> Vec<f64> {
        let m = self.size() as f64;
        (0..self.size())
            .map(|i| self.values.row(i).iter().sum::<f64>() / m)
            .collect()
    }

    pub fn grand_mean(&self) -> f64 {
        self.values.data().iter().sum::<f64>() / (self.size() * self.size()) as f64
    }
}

/// Uncentred Gram matrix of the patch columns. Each unordered pair is
/// evaluated once; rows are filled in parallel.
pub fn gram(spec: &KernelSpec, patches: &PatchSet) -> Result<GramMatrix> {
    spec.validate()?;
    let m = patches.count();
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "Gram matrix needs at least 2 patches, got {m}"
        )));
    }
    if matches!(spec, KernelSpec::Cosine) && patches.columns().any(is_zero) {
        return Err(Error::InvalidParameter(
            "cosine kernel is undefined for a zero patch".into(),
        ));
    }
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = patches.column(i);
            (i..m)
                .map(|j| spec.eval_unchecked(xi, patches.column(j)))
                .collect()
        })
        .collect();
    let mut values = Matrix::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            values[(i, i + off)] = v;
            values[(i + off, i)] = v;
        }
    }
    Ok(GramMatrix {
        values,
        centered: false,
    })
}

/// Centres an uncentred Gram matrix in feature space:
/// `K - 1K/M - K1/M + 1K1/M^2`.
pub fn center_gram(k: &GramMatrix) -> Result<GramMatrix> {
    if k.centered {
        return Err(Error::InvalidParameter("Gram matrix is already centered".into()));
    }
    Ok(force_center(k))
}

pub(crate) fn force_center(k: &GramMatrix) -> GramMatrix {
    let m = k.size();
    let rm = k.row_means();
    // column means; equal to row means up to rounding for symmetric input
    let cm: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|i| k.values[(i, j)]).sum::<f64>() / m as f64)
        .collect();
    let g = k.grand_mean();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = k.values[(i, j)] - cm[j] - rm[i] + g;
        }
    }
    // restore exact symmetry lost to rounding
    for i in 0..m {
        for j in i + 1..m {
            let s = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    GramMatrix {
        values: out,
        centered: true,
    }
}

/// Centres one test kernel column against training statistics:
/// `k~_i = k_i - mean(k) - rowmean_i(K) + grand_mean(K)`.
pub fn center_test_kernel(k_train: &GramMatrix, k_test: &[f64]) -> Result<Vec<f64>> {
    if k_train.centered {
        return Err(Error::InvalidParameter(
            "test centering needs the uncentered training Gram".into(),
        ));
    }
    if k_test.len() != k_train.size() {
        return Err(Error::Shape(format!(
            "test kernel has {} entries, training Gram is {}x{}",
            k_test.len(),
            k_train.size(),
            k_train.size()
        )));
    }
    let mut out = vec![0.0; k_test.len()];
    center_with_stats(&k_train.row_means(), k_train.grand_mean(), k_test, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn center_with_stats(row_means: &[f64], grand_mean: f64, k_test: &[f64], out: &mut [f64]) {
    let mean = k_test.iter().sum::<f64>() / k_test.len() as f64;
    for ((o, &k), &r) in out.iter_mut().zip(k_test).zip(row_means) {
        *o = k - mean - r + grand_mean;
    }
}
