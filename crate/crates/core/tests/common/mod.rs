//! Shared test oracles. Everything here goes through nalgebra's QR/LU paths,
//! deliberately independent of the library's own Cholesky/Jacobi kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;
use streamstat_core::Matrix;

pub fn to_na(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j))
}

/// Batch least squares via Householder QR: `(beta, sse)`.
pub fn batch_ls(x: &Matrix, y: &[f64]) -> (Vec<f64>, f64) {
    let xm = to_na(x);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .expect("full-rank pooled design");
    let resid = &yv - &xm * &beta;
    let sse = resid.dot(&resid);
    (beta.iter().copied().collect(), sse)
}

/// `(X'X)^{-1}` via LU.
pub fn batch_xtx_inv(x: &Matrix) -> DMatrix<f64> {
    let xm = to_na(x);
    (xm.transpose() * &xm)
        .try_inverse()
        .expect("full-rank pooled design")
}

pub struct BatchAnova {
    pub ssr: f64,
    pub sse: f64,
    pub sst: f64,
    pub msr: f64,
    pub mse: f64,
    pub f: f64,
    pub r_squared: f64,
}

pub fn batch_anova(x: &Matrix, y: &[f64]) -> BatchAnova {
    let n = y.len() as f64;
    let p = x.cols() as f64;
    let (_, sse) = batch_ls(x, y);
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ssr = sst - sse;
    let msr = ssr / (p - 1.0);
    let mse = sse / (n - p);
    BatchAnova {
        ssr,
        sse,
        sst,
        msr,
        mse,
        f: msr / mse,
        r_squared: ssr / sst,
    }
}

/// Batch t statistics `beta_j / sqrt(mse (X'X)^{-1}_jj)`.
pub fn batch_t_stats(x: &Matrix, y: &[f64]) -> Vec<(f64, f64)> {
    let (beta, sse) = batch_ls(x, y);
    let inv = batch_xtx_inv(x);
    let mse = sse / (y.len() - x.cols()) as f64;
    beta.iter()
        .enumerate()
        .map(|(j, &b)| {
            let se = (mse * inv[(j, j)]).sqrt();
            (b, b / se)
        })
        .collect()
}

/// Batch general-linear-hypothesis F statistic.
pub fn batch_glh_f(x: &Matrix, y: &[f64], c: &Matrix) -> f64 {
    let (beta, sse) = batch_ls(x, y);
    let cv = to_na(c) * batch_xtx_inv(x) * to_na(c).transpose();
    let cb = DVector::from_vec(c.matvec(&beta));
    let quad = cb.dot(&(cv.try_inverse().expect("full-row-rank contrast") * &cb));
    let q = c.rows() as f64;
    let mse = sse / (y.len() - x.cols()) as f64;
    (quad / q) / mse
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-9)
}

pub fn assert_vec_close(a: &[f64], b: &[f64], rel: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-9);
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(
            (x - y).abs() <= rel * scale,
            "{what}[{i}]: {x} vs {y} (rel scale {scale:.3e})"
        );
    }
}

/// Random regression data. When `rare_column` is set, that column is zero
/// except on a fraction of late rows, so early chunks are rank deficient
/// while the pooled design still has full rank.
pub struct LmDataset {
    pub x: Matrix,
    pub y: Vec<f64>,
}

pub fn random_lm_dataset(
    n: usize,
    p: usize,
    rare_column: Option<usize>,
    rng: &mut StdRng,
) -> LmDataset {
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut x = Matrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    let rare_start = n - (n / 4).max(2);
    for i in 0..n {
        x.set(i, 0, 1.0);
        for j in 1..p {
            let v = if Some(j) == rare_column {
                if i >= rare_start && rng.gen_bool(0.3) {
                    1.0
                } else {
                    0.0
                }
            } else {
                rng.gen_range(-1.5..1.5)
            };
            x.set(i, j, v);
        }
        let eta: f64 = (0..p).map(|j| x.get(i, j) * beta[j]).sum();
        y.push(eta + rng.gen_range(-1.0..1.0));
    }
    // guarantee the rare column is seen at least twice overall
    if let Some(j) = rare_column {
        x.set(n - 1, j, 1.0);
        x.set(n - 2, j, 1.0);
    }
    LmDataset { x, y }
}

/// Split `0..n` into `k` random contiguous chunks (each nonempty).
pub fn random_partition(n: usize, k: usize, rng: &mut StdRng) -> Vec<(usize, usize)> {
    assert!(k <= n);
    let mut cuts: Vec<usize> = (1..n).collect();
    for i in (1..cuts.len()).rev() {
        let j = rng.gen_range(0..=i);
        cuts.swap(i, j);
    }
    let mut chosen: Vec<usize> = cuts.into_iter().take(k - 1).collect();
    chosen.sort_unstable();
    let mut bounds = Vec::with_capacity(k);
    let mut start = 0;
    for c in chosen {
        bounds.push((start, c - start));
        start = c;
    }
    bounds.push((start, n - start));
    bounds
}

pub fn slice_rows(x: &Matrix, y: &[f64], start: usize, len: usize) -> (Matrix, Vec<f64>) {
    let p = x.cols();
    let mut xc = Matrix::zeros(len, p);
    for i in 0..len {
        for j in 0..p {
            xc.set(i, j, x.get(start + i, j));
        }
    }
    (xc, y[start..start + len].to_vec())
}
