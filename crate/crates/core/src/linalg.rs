//! Dense matrices and a cyclic Jacobi eigensolver for symmetric matrices.

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Full eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    /// Sorted non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: Matrix,
    pub sweeps: usize,
}

/// Eigendecomposition by cyclic Jacobi rotations.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// non-negative (lowest index wins ties). The computation is sequential and
/// bit-reproducible.
pub fn sym_eig(a: &Matrix) -> Result<SymEig> {
    let n = a.rows;
    if n == 0 || a.cols != n {
        return Err(Error::Shape(format!(
            "eigendecomposition needs a non-empty square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let norm = a.frobenius_norm();
    let mut asym = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = a[(i, j)] - a[(j, i)];
            asym += 2.0 * d * d;
        }
    }
    if asym.sqrt() > SYMMETRY_TOL * norm {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (asymmetry {:.3e}, norm {:.3e})",
            asym.sqrt(),
            norm
        )));
    }

    let mut m = a.clone();
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    // rows of `vt` are the eigenvector estimates, so rotations touch contiguous memory
    let mut vt = Matrix::identity(n);
    let tol = OFF_DIAGONAL_TOL * norm;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&m) >= tol && norm > 0.0 {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut vt, p, q);
            }
        }
    }
    if off_diagonal_norm(&m) >= tol && norm > 0.0 {
        return Err(Error::Numerical(format!(
            "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let row = vt.row(src);
        let mut best = 0;
        for k in 1..n {
            if row[k].abs() > row[best].abs() {
                best = k;
            }
        }
        let sign = if row[best] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, dst)] = sign * row[k];
        }
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors: vectors,
        sweeps,
    })
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Applies the rotation annihilating `m[p][q]` to the symmetric `m` (both
/// sides) and to the rows of `vt`.
fn rotate(m: &mut Matrix, vt: &mut Matrix, p: usize, q: usize) {
    let n = m.rows;
    let apq = m.data[p * n + q];
    if apq == 0.0 {
        return;
    }
    let (app, aqq) = (m.data[p * n + p], m.data[q * n + q]);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    rotate_rows(&mut m.data, n, p, q, c, s);
    m.data[p * n + p] = app - t * apq;
    m.data[q * n + q] = aqq + t * apq;
    m.data[p * n + q] = 0.0;
    m.data[q * n + p] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            m.data[k * n + p] = m.data[p * n + k];
            m.data[k * n + q] = m.data[q * n + k];
        }
    }
    rotate_rows(&mut vt.data, n, p, q, c, s);
}

/// `(row_p, row_q) <- (c row_p - s row_q, s row_p + c row_q)` for `p < q`.
fn rotate_rows(data: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 1.0]);
        assert_eq!(e.eigenvectors.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], -1.0, epsilon = 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = &e.eigenvectors;
        assert_abs_diff_eq!(v[(0, 0)], r, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(1, 0)], r, epsilon = 1e-14);
        // tie on magnitude: index 0 made non-negative
        assert_abs_diff_eq!(v[(0, 1)], r, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(1, 1)], -r, epsilon = 1e-14);
    }

    #[test]
    fn centered_two_point_gram() {
        let a = Matrix::from_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::InvalidParameter(_))));
        let b = Matrix::from_rows(&[&[f64::NAN]]).unwrap();
        assert!(matches!(sym_eig(&b), Err(Error::Numerical(_))));
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_and_scalar() {
        let e = sym_eig(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
        let e = sym_eig(&Matrix::from_rows(&[&[-4.0]]).unwrap()).unwrap();
        assert_eq!(e.eigenvalues, vec![-4.0]);
        assert_eq!(e.eigenvectors.data(), &[1.0]);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        let p = a.matmul(&a.transpose()).unwrap();
        assert_eq!(p.data(), &[14.0, 32.0, 32.0, 77.0]);
        assert!(a.matmul(&a).is_err());
    }
}
