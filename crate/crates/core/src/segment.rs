//! Threshold and clustering decisions on the polar change representation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::change::{DifferenceMap, PolarField};
use crate::error::{Error, Result};

const OTSU_BINS: usize = 256;
const KMEANS_TOL: f64 = 1e-9;
const KMEANS_MAX_ITER: usize = 300;

/// Label grid: 0 is non-change, `1..=classes` are change classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    pub classes: u32,
}

impl ChangeMap {
    pub fn new(height: usize, width: usize, labels: Vec<u32>, classes: u32) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} map needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l > classes) {
            return Err(Error::InvalidParameter(format!(
                "label {l} exceeds class count {classes}"
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
            classes,
        })
    }

    pub fn changed(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segmentation {
    #[default]
    Otsu,
    /// Two-cluster k-means on the magnitude.
    #[serde(alias = "kmeans2")]
    Kmeans,
}

fn finite_range(values: &[f64]) -> Result<(f64, f64)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite values in segmentation input".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::ConstantInput("no change signal: values are constant".into()));
    }
    Ok((lo, hi))
}

/// Otsu threshold over a 256-bin histogram of min-max scaled values.
///
/// Returns the upper edge of the last bin of the lower class, in the input
/// units; values strictly above it form the upper class.
pub fn otsu_threshold(values: &[f64]) -> Result<f64> {
    let (lo, hi) = finite_range(values)?;
    let span = hi - lo;
    let mut hist = [0u64; OTSU_BINS];
    for &v in values {
        let b = (((v - lo) / span) * OTSU_BINS as f64) as usize;
        hist[b.min(OTSU_BINS - 1)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_var) = (0, f64::NEG_INFINITY);
    for (t, &c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let diff = sum0 / w0 - (sum_all - sum0) / w1;
        let var = w0 * w1 * diff * diff;
        if var > best_var {
            best_var = var;
            best = t;
        }
    }
    Ok(lo + span * (best + 1) as f64 / OTSU_BINS as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `k x dim`, row-major.
    pub centers: Vec<f64>,
    pub dim: usize,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(data: &[f64], centers: &[f64], dim: usize) -> Vec<(usize, f64)> {
    data.par_chunks_exact(dim)
        .map(|p| nearest(p, centers, dim))
        .collect()
}

fn plus_plus_seed(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = data
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centers[..dim]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = &data[pick * dim..(pick + 1) * dim];
        for (d, p) in d2.iter_mut().zip(data.chunks_exact(dim)) {
            *d = d.min(sq_dist(p, c));
        }
        centers.extend_from_slice(c);
    }
    centers
}

/// k-means with k-means++ seeding. `data` is `N x dim`, row-major.
pub fn kmeans(data: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeansResult> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::Shape(format!(
            "data length {} is not a multiple of dimension {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    if k == 0 || n < k {
        return Err(Error::InvalidParameter(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite values in clustering input".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_seed(data, dim, k, &mut rng);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut assigned = assign(data, &centers, dim);
    loop {
        history.push(assigned.iter().map(|a| a.1).sum::<f64>());
        iterations += 1;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in data.chunks_exact(dim).zip(&assigned) {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next = centers.clone();
        let mut taken = vec![false; n];
        for c in 0..k {
            let dst = &mut next[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                for (d, s) in dst.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *d = s / counts[c] as f64;
                }
            } else {
                // empty cluster: move it onto the worst-fit point
                let mut far = None;
                for (i, a) in assigned.iter().enumerate() {
                    if !taken[i] && far.is_none_or(|(_, d)| a.1 > d) {
                        far = Some((i, a.1));
                    }
                }
                if let Some((i, _)) = far {
                    taken[i] = true;
                    dst.copy_from_slice(&data[i * dim..(i + 1) * dim]);
                }
            }
        }
        let moved = centers
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        assigned = assign(data, &centers, dim);
        if moved < KMEANS_TOL || iterations >= KMEANS_MAX_ITER {
            break;
        }
    }
    let inertia = assigned.iter().map(|a| a.1).sum::<f64>();
    history.push(inertia);
    Ok(KMeansResult {
        assignments: assigned.into_iter().map(|a| a.0).collect(),
        centers,
        dim,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Change / non-change split of the magnitude grid.
pub fn binary_map(
    rho: &[f64],
    height: usize,
    width: usize,
    method: Segmentation,
    seed: u64,
) -> Result<ChangeMap> {
    if rho.len() != height * width {
        return Err(Error::Shape(format!(
            "{} magnitudes for a {height}x{width} grid",
            rho.len()
        )));
    }
    finite_range(rho)?;
    let labels = match method {
        Segmentation::Otsu => {
            let t = otsu_threshold(rho)?;
            rho.iter().map(|&r| u32::from(r > t)).collect()
        }
        Segmentation::Kmeans => {
            let km = kmeans(rho, 1, 2, seed)?;
            let high = usize::from(km.centers[1] > km.centers[0]);
            km.assignments.iter().map(|&a| u32::from(a == high)).collect()
        }
    };
    ChangeMap::new(height, width, labels, 1)
}

/// Relabels 1-D cluster ids to `1..=k` by ascending center.
fn ascending_labels(km: &KMeansResult) -> Vec<u32> {
    let mut order: Vec<usize> = (0..km.k()).collect();
    order.sort_by(|&a, &b| km.centers[a].total_cmp(&km.centers[b]));
    let mut rank = vec![0u32; km.k()];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r as u32 + 1;
    }
    rank
}

/// Threshold on magnitude, then cluster the direction of changed pixels into
/// `k_changes` classes numbered by ascending center direction.
pub fn multiclass_map(
    polar: &PolarField,
    k_changes: usize,
    method: Segmentation,
    seed: u64,
) -> Result<ChangeMap> {
    if k_changes < 2 {
        return Err(Error::InvalidParameter(format!(
            "multi-class maps need at least 2 change classes, got {k_changes}; use a binary map"
        )));
    }
    let binary = binary_map(&polar.rho, polar.height, polar.width, method, seed)?;
    let changed: Vec<usize> = (0..binary.labels.len())
        .filter(|&i| binary.labels[i] == 1)
        .collect();
    if changed.len() < k_changes {
        return Err(Error::InvalidParameter(format!(
            "only {} changed pixels for {k_changes} change classes",
            changed.len()
        )));
    }
    let theta: Vec<f64> = changed.iter().map(|&i| polar.theta[i]).collect();
    let km = kmeans(&theta, 1, k_changes, seed)?;
    let rank = ascending_labels(&km);
    let mut labels = binary.labels;
    for (&i, &c) in changed.iter().zip(&km.assignments) {
        labels[i] = rank[c];
    }
    ChangeMap::new(polar.height, polar.width, labels, k_changes as u32)
}

/// Joint clustering of the difference vectors (optionally eigenvalue-scaled)
/// into `k_total` groups; the group whose center is nearest the origin is
/// non-change, the rest are numbered by ascending center norm.
pub fn multiclass_map_m1_m2(
    d: &DifferenceMap,
    k_total: usize,
    weighted: bool,
    seed: u64,
) -> Result<ChangeMap> {
    if k_total < 2 {
        return Err(Error::InvalidParameter(format!(
            "joint clustering needs at least 2 groups, got {k_total}"
        )));
    }
    let c = d.channels();
    let mut data = d.pixel_vectors();
    if weighted {
        for px in data.chunks_exact_mut(c) {
            for (v, l) in px.iter_mut().zip(d.eigenvalues()) {
                *v *= l;
            }
        }
    }
    let km = kmeans(&data, c, k_total, seed)?;
    let norms: Vec<f64> = (0..k_total)
        .map(|j| km.center(j).iter().map(|v| v * v).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..k_total).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
    let mut rank = vec![0u32; k_total];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r as u32;
    }
    let labels = km.assignments.iter().map(|&a| rank[a]).collect();
    ChangeMap::new(d.height(), d.width(), labels, (k_total - 1) as u32)
}
