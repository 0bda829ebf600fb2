//! Kernel PCA (and explicit linear PCA) on vectorized patches.
//!
//! A fitted [`KpcaModel`] keeps its training patches because projecting a new
//! patch needs its kernel values against every training sample. Coefficients
//! are scaled so that `l_j * |alpha_j|^2 = 1`, where `l_j` is the j-th
//! eigenvalue of the centred Gram matrix; the feature-space eigenvalue is
//! `l_j / M`, and it equals the variance of the j-th training score.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{center_gram, center_with_stats, gram, KernelSpec};
use crate::linalg::{sym_eig, Matrix, SymEig};
use crate::raster::{PatchSet, Raster};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const RELATIVE_EIGEN_FLOOR: f64 = 1e-10;
/// Absolute floor, as a fraction of `sum |K_ii|` of the uncentred Gram.
const ABSOLUTE_EIGEN_FLOOR: f64 = 1e-12;

/// Projected features: one row per component, one column per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
}

impl FeatureMatrix {
    pub fn components(&self) -> usize {
        self.values.rows()
    }

    pub fn count(&self) -> usize {
        self.values.cols()
    }

    pub fn component(&self, j: usize) -> &[f64] {
        self.values.row(j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaModel {
    kernel: KernelSpec,
    train: PatchSet,
    /// `M x k`, column j is alpha_j.
    alpha: Matrix,
    eigenvalues: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
}

fn count_retained(eig: &SymEig, scale: f64) -> usize {
    let top = eig.eigenvalues[0];
    let floor = (RELATIVE_EIGEN_FLOOR * top).max(ABSOLUTE_EIGEN_FLOOR * scale);
    if !(top > floor) {
        return 0;
    }
    eig.eigenvalues.iter().take_while(|&&l| l > floor).count()
}

/// Fits `p` kernel principal components on the training patches.
pub fn fit(train: &PatchSet, kernel: &KernelSpec, p: usize) -> Result<KpcaModel> {
    if p == 0 {
        return Err(Error::InvalidParameter("at least one component is required".into()));
    }
    if train.count() < p + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} training patches cannot support {p} components",
            train.count()
        )));
    }
    let k = gram(kernel, train)?;
    let kc = center_gram(&k)?;
    let eig = sym_eig(&kc.values)?;
    let m = train.count();
    let scale = (0..m).map(|i| k.values[(i, i)].abs()).sum::<f64>();
    let available = count_retained(&eig, scale);
    if available < p {
        return Err(Error::InsufficientComponents {
            requested: p,
            available,
        });
    }
    let mut alpha = Matrix::zeros(m, p);
    for j in 0..p {
        let inv = 1.0 / eig.eigenvalues[j].sqrt();
        for i in 0..m {
            alpha[(i, j)] = eig.eigenvectors[(i, j)] * inv;
        }
    }
    Ok(KpcaModel {
        kernel: *kernel,
        train: PatchSet::new(train.patch_h(), train.patch_w(), train.channels(), train.data().to_vec(), None)?,
        alpha,
        eigenvalues: eig.eigenvalues[..p].iter().map(|l| l / m as f64).collect(),
        row_means: k.row_means(),
        grand_mean: k.grand_mean(),
    })
}

impl KpcaModel {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Feature-space eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalues of the centred Gram matrix (`M` times the feature-space ones).
    pub fn gram_eigenvalues(&self) -> Vec<f64> {
        let m = self.train.count() as f64;
        self.eigenvalues.iter().map(|l| l * m).collect()
    }

    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn train_patches(&self) -> &PatchSet {
        &self.train
    }

    pub fn patch_dim(&self) -> usize {
        self.train.dim()
    }

    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    /// Projects one patch; `scratch` must hold two slots per training patch.
    #[inline]
    pub(crate) fn project_into(&self, patch: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let m = self.train.count();
        let (raw, centered) = scratch[..2 * m].split_at_mut(m);
        for (r, x) in raw.iter_mut().zip(self.train.columns()) {
            *r = self.kernel.eval_unchecked(x, patch);
        }
        center_with_stats(&self.row_means, self.grand_mean, raw, centered);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &kt) in centered.iter().enumerate() {
            for (o, &aij) in out.iter_mut().zip(self.alpha.row(i)) {
                *o += aij * kt;
            }
        }
    }

    pub(crate) fn scratch(&self) -> Vec<f64> {
        vec![0.0; 2 * self.train.count()]
    }

    pub(crate) fn check_patch_dim(&self, dim: usize) -> Result<()> {
        if dim != self.patch_dim() {
            return Err(Error::Shape(format!(
                "patch dimension {dim} does not match model dimension {}",
                self.patch_dim()
            )));
        }
        Ok(())
    }

    /// Scores of every column of `patches` on the retained components.
    pub fn project(&self, patches: &PatchSet) -> Result<FeatureMatrix> {
        self.check_patch_dim(patches.dim())?;
        let k = self.components();
        let cols: Vec<Vec<f64>> = patches
            .columns()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map_init(
                || self.scratch(),
                |scratch, patch| {
                    let mut out = vec![0.0; k];
                    self.project_into(patch, scratch, &mut out);
                    out
                },
            )
            .collect();
        let mut values = Matrix::zeros(k, patches.count());
        for (c, col) in cols.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                values[(j, c)] = v;
            }
        }
        Ok(FeatureMatrix { values })
    }
}

pub fn project(model: &KpcaModel, patches: &PatchSet) -> Result<FeatureMatrix> {
    model.project(patches)
}

/// Serialized form of a [`KpcaModel`].
///
/// `alpha` is row-major `train_count x components`; `train_patches` is the
/// base64 encoding of the little-endian f64 patch columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub kernel: KernelSpec,
    pub components: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    pub channels: usize,
    pub train_count: usize,
    pub eigenvalues: Vec<f64>,
    pub alpha: Vec<f64>,
    pub row_means: Vec<f64>,
    pub grand_mean: f64,
    pub train_patches: String,
}

impl KpcaModel {
    pub fn to_file(&self) -> ModelFile {
        let mut bytes = Vec::with_capacity(self.train.data().len() * 8);
        for v in self.train.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        ModelFile {
            kernel: self.kernel,
            components: self.components(),
            patch_h: self.train.patch_h(),
            patch_w: self.train.patch_w(),
            channels: self.train.channels(),
            train_count: self.train.count(),
            eigenvalues: self.eigenvalues.clone(),
            alpha: self.alpha.data().to_vec(),
            row_means: self.row_means.clone(),
            grand_mean: self.grand_mean,
            train_patches: B64.encode(bytes),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        let bytes = B64
            .decode(file.train_patches.as_bytes())
            .map_err(|e| Error::Format(format!("training patch payload: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Format("training patch payload is not f64-aligned".into()));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let train = PatchSet::new(file.patch_h, file.patch_w, file.channels, data, None)?;
        if train.count() != file.train_count
            || file.row_means.len() != file.train_count
            || file.eigenvalues.len() != file.components
        {
            return Err(Error::Format("model file fields disagree on sizes".into()));
        }
        let alpha = Matrix::from_vec(file.train_count, file.components, file.alpha)?;
        file.kernel.validate()?;
        Ok(Self {
            kernel: file.kernel,
            train,
            alpha,
            eigenvalues: file.eigenvalues,
            row_means: file.row_means,
            grand_mean: file.grand_mean,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file())?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

/// Explicit linear PCA filters learned from mean-centred patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFilterBank {
    patch_h: usize,
    patch_w: usize,
    channels: usize,
    mean: Vec<f64>,
    /// `p x dim`, row j is filter j.
    filters: Matrix,
    eigenvalues: Vec<f64>,
}

impl PcaFilterBank {
    pub fn filters(&self) -> &Matrix {
        &self.filters
    }

    pub fn filter(&self, j: usize) -> &[f64] {
        self.filters.row(j)
    }

    /// Filter j reshaped to an `s1 x s2 x c` convolution kernel.
    pub fn filter_kernel(&self, j: usize) -> Raster {
        Raster::new(self.patch_h, self.patch_w, self.channels, self.filter(j).to_vec())
            .expect("filter length matches patch geometry")
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// Covariance eigenvectors of the mean-centred training patches.
pub fn pca_fit(train: &PatchSet, p: usize) -> Result<PcaFilterBank> {
    if p == 0 {
        return Err(Error::InvalidParameter("at least one component is required".into()));
    }
    if train.count() < p + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} training patches cannot support {p} components",
            train.count()
        )));
    }
    let dim = train.dim();
    let m = train.count() as f64;
    let mut mean = vec![0.0; dim];
    for col in train.columns() {
        for (a, v) in mean.iter_mut().zip(col) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m);
    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for col in train.columns() {
        for ((c, v), mu) in centered.iter_mut().zip(col).zip(&mean) {
            *c = v - mu;
        }
        for a in 0..dim {
            for b in a..dim {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / m;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = sym_eig(&cov)?;
    let scale = train.data().iter().map(|v| v * v).sum::<f64>() / m;
    let available = count_retained(&eig, scale);
    if available < p {
        return Err(Error::InsufficientComponents {
            requested: p,
            available,
        });
    }
    let mut filters = Matrix::zeros(p, dim);
    for j in 0..p {
        for a in 0..dim {
            filters[(j, a)] = eig.eigenvectors[(a, j)];
        }
    }
    Ok(PcaFilterBank {
        patch_h: train.patch_h(),
        patch_w: train.patch_w(),
        channels: train.channels(),
        mean,
        filters,
        eigenvalues: eig.eigenvalues[..p].to_vec(),
    })
}

/// `F_j = W_j . (patch - mean)` for every column.
pub fn pca_project(bank: &PcaFilterBank, patches: &PatchSet) -> Result<FeatureMatrix> {
    if patches.dim() != bank.mean.len() {
        return Err(Error::Shape(format!(
            "patch dimension {} does not match filter dimension {}",
            patches.dim(),
            bank.mean.len()
        )));
    }
    let p = bank.filters.rows();
    let mut values = Matrix::zeros(p, patches.count());
    let mut centered = vec![0.0; bank.mean.len()];
    for (c, col) in patches.columns().enumerate() {
        for ((x, v), mu) in centered.iter_mut().zip(col).zip(&bank.mean) {
            *x = v - mu;
        }
        for j in 0..p {
            values[(j, c)] = bank.filter(j).iter().zip(&centered).map(|(a, b)| a * b).sum();
        }
    }
    Ok(FeatureMatrix { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vectors(dim: usize, data: &[f64]) -> PatchSet {
        PatchSet::from_vectors(dim, data.to_vec()).unwrap()
    }

    #[test]
    fn two_orthonormal_patches() {
        let ps = vectors(2, &[1.0, 0.0, 0.0, 1.0]);
        let model = fit(&ps, &KernelSpec::Linear, 1).unwrap();
        assert_abs_diff_eq!(model.gram_eigenvalues()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(model.eigenvalues()[0], 0.5, epsilon = 1e-14);
        let a = model.alpha().column(0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(a[0], r, epsilon = 1e-14);
        assert_abs_diff_eq!(a[1], -r, epsilon = 1e-14);
        // l * (a . a) = 1
        assert_abs_diff_eq!(a[0] * a[0] + a[1] * a[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn duplicates_have_no_components() {
        let ps = vectors(3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        for spec in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 1.0 }] {
            match fit(&ps, &spec, 1) {
                Err(Error::InsufficientComponents { requested: 1, available: 0 }) => {}
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn too_many_components_reports_available() {
        // three points on a line: rank 1 under the linear kernel
        let ps = vectors(2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        match fit(&ps, &KernelSpec::Linear, 2) {
            Err(Error::InsufficientComponents { requested: 2, available: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(fit(&ps, &KernelSpec::Linear, 3).is_err());
        assert!(fit(&ps, &KernelSpec::Linear, 0).is_err());
    }

    #[test]
    fn query_equal_to_training_patch_gets_its_score() {
        let ps = vectors(2, &[0.0, 1.0, 2.0, 0.5, -1.0, 3.0, 0.2, 0.2]);
        let model = fit(&ps, &KernelSpec::Rbf { gamma: 0.3 }, 2).unwrap();
        let train_scores = model.project(&ps).unwrap();
        let q = vectors(2, &[2.0, 0.5, 2.0, 0.5]);
        let f = model.project(&q).unwrap();
        for j in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(f.values[(j, c)], train_scores.values[(j, 1)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ps = vectors(2, &[0.0, 1.0, 2.0, 0.5, -1.0, 3.0]);
        let model = fit(&ps, &KernelSpec::Linear, 1).unwrap();
        assert!(model.project(&vectors(3, &[1.0, 2.0, 3.0])).is_err());
        let bank = pca_fit(&ps, 1).unwrap();
        assert!(pca_project(&bank, &vectors(3, &[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let ps = vectors(2, &[0.0, 1.0, 2.0, 0.5, -1.0, 3.0, 0.25, -0.125]);
        let model = fit(&ps, &KernelSpec::Rbf { gamma: 0.7 }, 2).unwrap();
        let text = serde_json::to_string(&model.to_file()).unwrap();
        let back = KpcaModel::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn axis_aligned_filters_for_diagonal_covariance() {
        // x varies with spread 2, y with spread 1, uncorrelated
        let ps = vectors(2, &[2.0, 0.0, -2.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let bank = pca_fit(&ps, 2).unwrap();
        assert_eq!(bank.filter(0), &[1.0, 0.0]);
        assert_eq!(bank.filter(1), &[0.0, 1.0]);
        assert_abs_diff_eq!(bank.eigenvalues()[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bank.eigenvalues()[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rank_one_direction() {
        let u = [0.6, -0.8];
        let data: Vec<f64> = [-2.0, -1.0, 0.5, 3.0].iter().flat_map(|t| [t * u[0], t * u[1]]).collect();
        let bank = pca_fit(&vectors(2, &data), 1).unwrap();
        let w = bank.filter(0);
        let sign = w[0].signum() * u[0].signum();
        assert_abs_diff_eq!(w[0], sign * u[0], epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], sign * u[1], epsilon = 1e-12);
        assert_eq!(bank.filter_kernel(0).shape(), (1, 1, 2));
    }

    #[test]
    fn pca_projection_identity_and_zero() {
        let ps = vectors(2, &[2.0, 0.0, -2.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let bank = pca_fit(&ps, 2).unwrap();
        let f = pca_project(&bank, &ps).unwrap();
        // identity filters on zero-mean data reproduce the data
        for c in 0..4 {
            assert_eq!(f.values[(0, c)], ps.column(c)[0]);
            assert_eq!(f.values[(1, c)], ps.column(c)[1]);
        }
        let z = pca_project(&bank, &vectors(2, &[0.0, 0.0])).unwrap();
        assert_eq!(z.values.data(), &[0.0, 0.0]);
    }
}
