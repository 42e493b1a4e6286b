//! Factorizations and generalized inverses for small symmetric matrices.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Conservative relative rank cutoff: singular values below
/// `64 * dim * eps * s_max` are treated as zero.
pub fn default_rank_tol(dim: usize) -> f64 {
    64.0 * dim as f64 * f64::EPSILON
}

/// Which generalized inverse to use on rank-deficient systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GinvKind {
    /// Moore–Penrose pseudoinverse via SVD.
    #[default]
    MoorePenrose,
    /// Block inverse of a maximal full-rank leading submatrix, zero elsewhere.
    Rao,
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    dim: usize,
    /// Row-major lower triangle, including the diagonal.
    lower: Vec<f64>,
}

impl SpdFactor {
    /// Factor `a = L L'`. Fails with `NotPositiveDefinite` when a pivot drops to
    /// `dim * eps * max_diag` or below.
    pub fn new(a: &Matrix) -> Result<SpdFactor> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
        }
        if !a.is_symmetric(1e-12) {
            return Err(Error::DimensionMismatch("cholesky needs a symmetric matrix".into()));
        }
        let n = a.rows();
        let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a.get(i, i).abs()));
        let pivot_floor = n as f64 * f64::EPSILON * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= pivot_floor {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let dj = d.sqrt();
            l[j * n + j] = dj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / dj;
            }
        }
        Ok(SpdFactor { dim: n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve `L z = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solve `L' z = b` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solve `A x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.dim);
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut col = vec![0.0; b.rows()];
        for j in 0..b.cols() {
            for i in 0..b.rows() {
                col[i] = b.get(i, j);
            }
            self.forward(&mut col);
            self.backward(&mut col);
            for i in 0..b.rows() {
                out.set(i, j, col[i]);
            }
        }
        out
    }

    /// `A^{-1}` as a dense matrix.
    pub fn inverse(&self) -> Matrix {
        self.solve_mat(&Matrix::identity(self.dim))
    }

    /// The lower-triangular factor as a dense matrix.
    pub fn lower_matrix(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                out.set(i, j, self.lower[i * n + j]);
            }
        }
        out
    }

    /// `x' A^{-1} x`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let mut z = x.to_vec();
        self.forward(&mut z);
        z.iter().map(|v| v * v).sum()
    }
}

/// Solve `A X = B` for symmetric positive-definite `A`.
pub fn chol_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(SpdFactor::new(a)?.solve_mat(b))
}

/// Thin singular value decomposition `A = U diag(s) V'` with
/// `r = min(rows, cols)` retained columns.
///
/// Computed by one-sided Jacobi rotations, which orthogonalize the columns of
/// `A` directly and deliver small singular values to high relative accuracy —
/// exactly what rank decisions on nearly-dependent chunk designs need.
#[derive(Debug, Clone)]
pub struct SvdFactor {
    pub u: Matrix,
    pub singular: Vec<f64>,
    pub vt: Matrix,
}

impl SvdFactor {
    pub fn new(a: &Matrix) -> SvdFactor {
        if a.rows() >= a.cols() {
            one_sided_jacobi(a)
        } else {
            let f = one_sided_jacobi(&a.transpose());
            SvdFactor {
                u: f.vt.transpose(),
                singular: f.singular,
                vt: f.u.transpose(),
            }
        }
    }

    pub fn s_max(&self) -> f64 {
        self.singular.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, rank_tol: f64) -> usize {
        let cut = rank_tol * self.s_max();
        self.singular.iter().filter(|&&s| s > cut).count()
    }

    /// Reconstruct `U diag(s) V'`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for j in 0..us.cols() {
                us.set(i, j, us.get(i, j) * self.singular[j]);
            }
        }
        us.matmul(&self.vt)
    }
}

/// One-sided Jacobi SVD for `rows >= cols`. Works on the transpose so each
/// column of the input is a contiguous row, and applies plane rotations until
/// all column pairs are orthogonal.
fn one_sided_jacobi(a: &Matrix) -> SvdFactor {
    let n = a.rows();
    let p = a.cols();
    debug_assert!(n >= p);
    let mut c = a.transpose(); // p x n, row k is column k of `a`
    let mut vt = Matrix::identity(p);

    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (mut alpha, mut beta, mut gamma) = (0.0_f64, 0.0_f64, 0.0_f64);
                for k in 0..n {
                    let ci = c.get(i, k);
                    let cj = c.get(j, k);
                    alpha += ci * ci;
                    beta += cj * cj;
                    gamma += ci * cj;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for k in 0..n {
                    let ci = c.get(i, k);
                    let cj = c.get(j, k);
                    c.set(i, k, cs * ci - sn * cj);
                    c.set(j, k, sn * ci + cs * cj);
                }
                for k in 0..p {
                    let vi = vt.get(i, k);
                    let vj = vt.get(j, k);
                    vt.set(i, k, cs * vi - sn * vj);
                    vt.set(j, k, sn * vi + cs * vj);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // singular values are the column norms, sorted descending
    let mut order: Vec<usize> = (0..p).collect();
    let norms: Vec<f64> = (0..p)
        .map(|k| c.row(k).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let mut u = Matrix::zeros(n, p);
    let mut vt_sorted = Matrix::zeros(p, p);
    let mut singular = Vec::with_capacity(p);
    for (slot, &k) in order.iter().enumerate() {
        let s = norms[k];
        singular.push(s);
        if s > 0.0 {
            for r in 0..n {
                u.set(r, slot, c.get(k, r) / s);
            }
        }
        for col in 0..p {
            vt_sorted.set(slot, col, vt.get(k, col));
        }
    }
    SvdFactor {
        u,
        singular,
        vt: vt_sorted,
    }
}

/// Number of singular values above `rank_tol * s_max`.
pub fn rank_detect(a: &Matrix, rank_tol: f64) -> usize {
    SvdFactor::new(a).rank(rank_tol)
}

/// Moore–Penrose pseudoinverse. Singular values at or below
/// `rank_tol * s_max` are dropped; the zero matrix maps to the zero matrix.
pub fn pinv_svd(a: &Matrix, rank_tol: f64) -> Matrix {
    let svd = SvdFactor::new(a);
    let cut = rank_tol * svd.s_max();
    // A+ = V diag(1/s) U'
    let mut out = Matrix::zeros(a.cols(), a.rows());
    for (k, &s) in svd.singular.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..a.cols() {
            let vik = svd.vt.get(k, i);
            if vik == 0.0 {
                continue;
            }
            for j in 0..a.rows() {
                let val = out.get(i, j) + vik * inv * svd.u.get(j, k);
                out.set(i, j, val);
            }
        }
    }
    out
}

/// Generalized inverse of a symmetric psd matrix built by inverting a
/// full-rank principal submatrix and zero-padding the rest.
///
/// The submatrix indices are chosen by diagonal-pivoted elimination: rank is
/// fixed first from the singular values, then columns join in order of the
/// largest remaining Schur-complement pivot, which keeps the selected block
/// well conditioned even when early columns are nearly parallel.
pub fn ginv_rao(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("ginv_rao needs a square matrix".into()));
    }
    let n = a.rows();
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a.get(i, i)));
    if max_diag <= 0.0 {
        return Err(Error::Degenerate("ginv_rao of the zero matrix".into()));
    }
    let rank = rank_detect(a, rank_tol);
    let pivot_floor = rank_tol.max(n as f64 * f64::EPSILON) * max_diag;

    let mut residual = a.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(rank);
    while selected.len() < rank {
        let pivot = (0..n)
            .filter(|j| !selected.contains(j))
            .max_by(|&x, &y| residual.get(x, x).total_cmp(&residual.get(y, y)));
        let Some(j) = pivot else { break };
        let d = residual.get(j, j);
        if d <= pivot_floor {
            break;
        }
        selected.push(j);
        // Schur complement step removing column j's contribution
        let col: Vec<f64> = (0..n).map(|i| residual.get(i, j)).collect();
        for r in 0..n {
            let cr = col[r] / d;
            if cr == 0.0 {
                continue;
            }
            for c in 0..n {
                let val = residual.get(r, c) - cr * col[c];
                residual.set(r, c, val);
            }
        }
    }
    selected.sort_unstable();

    // invert the selected block
    let m = selected.len();
    let mut block = Matrix::zeros(m, m);
    for (bi, &i) in selected.iter().enumerate() {
        for (bj, &j) in selected.iter().enumerate() {
            block.set(bi, bj, a.get(i, j));
        }
    }
    let block_inv = SpdFactor::new(&block)
        .map_err(|_| Error::Degenerate("selected principal submatrix is not invertible".into()))?
        .inverse();

    let mut out = Matrix::zeros(n, n);
    for (bi, &i) in selected.iter().enumerate() {
        for (bj, &j) in selected.iter().enumerate() {
            out.set(i, j, block_inv.get(bi, bj));
        }
    }
    Ok(out)
}

/// Generalized inverse dispatch for symmetric psd matrices.
pub fn ginv(a: &Matrix, kind: GinvKind, rank_tol: f64) -> Matrix {
    match kind {
        GinvKind::MoorePenrose => pinv_svd(a, rank_tol),
        GinvKind::Rao => ginv_rao(a, rank_tol).unwrap_or_else(|_| Matrix::zeros(a.rows(), a.cols())),
    }
}
