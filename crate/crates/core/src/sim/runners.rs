//! Study runners. Each one reproduces a reference simulation design at desk
//! scale, returning a CSV-ready table with point estimates and standard
//! errors. Replicates run in parallel over per-replicate RNG streams, so the
//! output is bit-identical for a given `(config, seed, reps)` regardless of
//! the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{
    gen_design, gen_outlier_stream, gen_response, replicate_rng, validate_covariate_moments,
    CovariateKind, EeSimConfig, ErrorKind, OutlierSimConfig,
};
use crate::diag::{
    asymptotic_f_test, bh_adjust, gamma_whiten, normal_f_test, outlier_t_test,
    predictive_residuals, SubgroupScheme,
};
use crate::dist::t_two_sided;
use crate::ee::{irls_solve, CeeState, CueeState, EeFamily, IrlsConfig, VarianceKind};
use crate::error::{Error, Result};
use crate::lm::{summarize_chunk, LmState};
use crate::numkern::{default_rank_tol, GinvKind, Matrix, SpdFactor};

/// Simple CSV-ready table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Table {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.7}")
}

fn binomial_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

fn run_pool<T: Send, F: Fn(usize) -> T + Sync>(workers: usize, reps: usize, job: F) -> Vec<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(|| (0..reps).into_par_iter().map(|rep| job(rep)).collect())
}

fn outlier_covariate_spec(p: usize) -> Vec<CovariateKind> {
    let mut spec = vec![CovariateKind::Intercept];
    spec.extend(std::iter::repeat_n(CovariateKind::Normal, p - 1));
    spec
}

fn validate_outlier_generator(cfg: &OutlierSimConfig, seed: u64) -> Result<()> {
    let probe = OutlierSimConfig {
        k_star: 1,
        n_k: 10_000,
        delta: 0.0,
        ..cfg.clone()
    };
    let mut rng = replicate_rng(seed, u64::MAX);
    let chunks = gen_outlier_stream(&probe, &mut rng)?;
    validate_covariate_moments(&chunks[0].x, &outlier_covariate_spec(cfg.beta.len()))
}

fn validate_ee_generator(covariates: &[CovariateKind], seed: u64) -> Result<()> {
    let mut rng = replicate_rng(seed, u64::MAX);
    let x = gen_design(covariates, 10_000, &mut rng);
    validate_covariate_moments(&x, covariates)
}

// ---------------------------------------------------------------------------
// global outlier test power
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    pub k_stars: Vec<usize>,
    pub n_ks: Vec<usize>,
    pub deltas: Vec<f64>,
    pub error_kinds: Vec<ErrorKind>,
    pub beta: Vec<f64>,
    /// Number of subgroups for the asymptotic F test.
    pub m: usize,
    pub alpha: f64,
    pub contamination_rate: f64,
}

impl Default for PowerStudyConfig {
    fn default() -> Self {
        PowerStudyConfig {
            k_stars: vec![5, 10, 25, 100],
            n_ks: vec![100, 500],
            deltas: vec![0.0, 2.0, 4.0, 6.0],
            error_kinds: vec![
                ErrorKind::Normal,
                ErrorKind::SkewT {
                    nu: 3.0,
                    gamma: 1.5,
                },
            ],
            beta: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            m: 2,
            alpha: 0.05,
            contamination_rate: 0.05,
        }
    }
}

/// Rejection rates of the two global outlier tests over the configured grid.
pub fn run_power_study(
    cfg: &PowerStudyConfig,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Table> {
    let mut table = Table::new(&[
        "error_kind",
        "delta",
        "n_k",
        "k_star",
        "reject_normal_f",
        "reject_normal_f_se",
        "reject_asymptotic_f",
        "reject_asymptotic_f_se",
    ]);
    let base = OutlierSimConfig {
        beta: cfg.beta.clone(),
        contamination_rate: cfg.contamination_rate,
        ..OutlierSimConfig::default()
    };
    validate_outlier_generator(&base, seed)?;
    let mut cell_index = 0u64;
    for kind in &cfg.error_kinds {
        for &delta in &cfg.deltas {
            for &n_k in &cfg.n_ks {
                for &k_star in &cfg.k_stars {
                    let cell_cfg = OutlierSimConfig {
                        beta: cfg.beta.clone(),
                        k_star,
                        n_k,
                        delta,
                        error_kind: *kind,
                        contamination_rate: cfg.contamination_rate,
                    };
                    let (normal_rej, asym_rej) =
                        power_cell(&cell_cfg, cfg.m, cfg.alpha, reps, seed, cell_index, workers)?;
                    table.push(vec![
                        kind.label(),
                        fmt(delta),
                        n_k.to_string(),
                        k_star.to_string(),
                        fmt(normal_rej),
                        fmt(binomial_se(normal_rej, reps)),
                        fmt(asym_rej),
                        fmt(binomial_se(asym_rej, reps)),
                    ]);
                    cell_index += 1;
                }
            }
        }
    }
    Ok(table)
}

pub(crate) fn power_cell(
    cfg: &OutlierSimConfig,
    m: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    cell_index: u64,
    workers: usize,
) -> Result<(f64, f64)> {
    let p = cfg.beta.len();
    let rank_tol = default_rank_tol(p);
    let results: Vec<Result<(bool, bool)>> = run_pool(workers, reps, |rep| {
        let mut rng = replicate_rng(seed, (cell_index << 32) | rep as u64);
        let chunks = gen_outlier_stream(cfg, &mut rng)?;
        let mut state = LmState::new(p);
        for chunk in &chunks[..chunks.len() - 1] {
            state.update(&summarize_chunk(&chunk.x, &chunk.y, rank_tol)?)?;
        }
        let last = chunks.last().expect("nonempty stream");
        let pr = predictive_residuals(&state, &last.x, &last.y)?;
        let normal = normal_f_test(&pr, &state, &last.x)?;
        let e_star = gamma_whiten(&state, &last.x, &pr.e_check)?;
        let scheme = SubgroupScheme::contiguous(last.x.rows(), m)?;
        let asym = asymptotic_f_test(&e_star, &scheme, &state)?;
        Ok((normal.p_value < alpha, asym.p_value < alpha))
    });
    let mut normal_count = 0usize;
    let mut asym_count = 0usize;
    for r in results {
        let (n, a) = r?;
        normal_count += usize::from(n);
        asym_count += usize::from(a);
    }
    Ok((
        normal_count as f64 / reps as f64,
        asym_count as f64 / reps as f64,
    ))
}

// ---------------------------------------------------------------------------
// per-observation outlier tests: false positives / false negatives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FpFnStudyConfig {
    pub k_stars: Vec<usize>,
    pub n_ks: Vec<usize>,
    pub deltas: Vec<f64>,
    pub beta: Vec<f64>,
    /// Benjamini–Hochberg threshold on the adjusted p-values.
    pub bh_alpha: f64,
    pub contamination_rate: f64,
}

impl Default for FpFnStudyConfig {
    fn default() -> Self {
        FpFnStudyConfig {
            k_stars: vec![5, 10, 25, 100],
            n_ks: vec![100, 500],
            deltas: vec![0.0, 2.0, 4.0, 6.0],
            beta: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            bh_alpha: 0.10,
            contamination_rate: 0.05,
        }
    }
}

/// Flag outliers inside a single chunk using externally studentized residuals
/// of the chunk-only fit, with BH adjustment.
pub fn studentized_outlier_flags(x: &Matrix, y: &[f64], bh_alpha: f64) -> Result<Vec<bool>> {
    let n = x.rows();
    let p = x.cols();
    if n <= p + 1 {
        return Err(Error::InsufficientData { need: p + 2, have: n });
    }
    let xtx = x.gram();
    let factor = SpdFactor::new(&xtx)
        .map_err(|_| Error::SingularCumulative("chunk design is rank deficient".into()))?;
    let beta = factor.solve_vec(&x.tr_matvec(y));
    let mut sse = 0.0;
    let mut resid = Vec::with_capacity(n);
    let mut lev = Vec::with_capacity(n);
    for i in 0..n {
        let e = y[i] - crate::numkern::dot(x.row(i), &beta);
        sse += e * e;
        resid.push(e);
        lev.push(factor.inv_quad_form(x.row(i)));
    }
    let df = (n - p - 1) as f64;
    let p_raw: Vec<f64> = (0..n)
        .map(|i| {
            let denom = (sse * (1.0 - lev[i]) - resid[i] * resid[i]).max(1e-300);
            let t = resid[i] * (df / denom).sqrt();
            t_two_sided(t, df)
        })
        .collect();
    let p_adj = bh_adjust(&p_raw)?;
    Ok(p_adj.into_iter().map(|p| p < bh_alpha).collect())
}

/// Average false positives and false negatives per chunk for the predictive
/// residual test and the chunk-only externally studentized residual test.
pub fn run_fpfn_study(
    cfg: &FpFnStudyConfig,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Table> {
    let mut table = Table::new(&[
        "delta",
        "n_k",
        "k_star",
        "fp_predictive",
        "fp_predictive_se",
        "fn_predictive",
        "fn_predictive_se",
        "fp_studentized",
        "fp_studentized_se",
        "fn_studentized",
        "fn_studentized_se",
    ]);
    let base = OutlierSimConfig {
        beta: cfg.beta.clone(),
        contamination_rate: cfg.contamination_rate,
        ..OutlierSimConfig::default()
    };
    validate_outlier_generator(&base, seed)?;
    let p = cfg.beta.len();
    let rank_tol = default_rank_tol(p);
    let mut cell_index = 0u64;
    for &delta in &cfg.deltas {
        for &n_k in &cfg.n_ks {
            for &k_star in &cfg.k_stars {
                let cell_cfg = OutlierSimConfig {
                    beta: cfg.beta.clone(),
                    k_star,
                    n_k,
                    delta,
                    error_kind: ErrorKind::Normal,
                    contamination_rate: cfg.contamination_rate,
                };
                let results: Vec<Result<[f64; 4]>> = run_pool(workers, reps, |rep| {
                    let mut rng = replicate_rng(seed, (cell_index << 32) | rep as u64);
                    let chunks = gen_outlier_stream(&cell_cfg, &mut rng)?;
                    let mut state = LmState::new(p);
                    for chunk in &chunks[..chunks.len() - 1] {
                        state.update(&summarize_chunk(&chunk.x, &chunk.y, rank_tol)?)?;
                    }
                    let last = chunks.last().expect("nonempty stream");
                    let pr = predictive_residuals(&state, &last.x, &last.y)?;
                    let decisions = outlier_t_test(&pr, &state, cfg.bh_alpha)?;
                    let stud = studentized_outlier_flags(&last.x, &last.y, cfg.bh_alpha)?;
                    let mut cell = [0.0_f64; 4];
                    for i in 0..last.x.rows() {
                        let truth = last.outlier[i];
                        cell[0] += f64::from(decisions[i].flagged && !truth);
                        cell[1] += f64::from(!decisions[i].flagged && truth);
                        cell[2] += f64::from(stud[i] && !truth);
                        cell[3] += f64::from(!stud[i] && truth);
                    }
                    Ok(cell)
                });
                let mut sums = [0.0_f64; 4];
                let mut sq = [0.0_f64; 4];
                for r in results {
                    let c = r?;
                    for j in 0..4 {
                        sums[j] += c[j];
                        sq[j] += c[j] * c[j];
                    }
                }
                let n = reps as f64;
                let mean = |j: usize| sums[j] / n;
                let se = |j: usize| {
                    ((sq[j] / n - mean(j) * mean(j)).max(0.0) / (n - 1.0).max(1.0)).sqrt()
                };
                table.push(vec![
                    fmt(delta),
                    n_k.to_string(),
                    k_star.to_string(),
                    fmt(mean(0)),
                    fmt(se(0)),
                    fmt(mean(1)),
                    fmt(se(1)),
                    fmt(mean(2)),
                    fmt(se(2)),
                    fmt(mean(3)),
                    fmt(se(3)),
                ]);
                cell_index += 1;
            }
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// CEE vs CUEE RMSE as the number of blocks grows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmseVsKConfig {
    pub n_total: usize,
    pub ks: Vec<usize>,
    #[serde(flatten)]
    pub model: EeSimConfig,
}

impl Default for RmseVsKConfig {
    fn default() -> Self {
        RmseVsKConfig {
            n_total: 20_000,
            ks: vec![10, 50, 200, 1000],
            model: EeSimConfig {
                family: EeFamily::Logistic,
                beta: vec![1.0; 6],
                covariates: vec![
                    CovariateKind::Intercept,
                    CovariateKind::Bernoulli(0.5),
                    CovariateKind::Bernoulli(0.5),
                    CovariateKind::Bernoulli(0.5),
                    CovariateKind::Normal,
                    CovariateKind::Normal,
                ],
            },
        }
    }
}

fn rmse(beta_hat: &[f64], truth: &[f64]) -> f64 {
    let p = truth.len() as f64;
    (beta_hat
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / p)
        .sqrt()
}

/// Average terminal RMSE of the CEE and CUEE estimators over a grid of block
/// counts, holding the total sample fixed.
pub fn run_rmse_vs_k(
    cfg: &RmseVsKConfig,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Table> {
    for &k in &cfg.ks {
        if cfg.n_total % k != 0 {
            return Err(Error::OutOfRange(format!(
                "n_total = {} is not divisible by K = {k}",
                cfg.n_total
            )));
        }
    }
    validate_ee_generator(&cfg.model.covariates, seed)?;
    let p = cfg.model.beta.len();
    let family = &cfg.model.family;
    let irls = IrlsConfig {
        variance: VarianceKind::ModelBased,
        ..IrlsConfig::default()
    };
    let per_rep: Vec<Result<Vec<(f64, f64)>>> = run_pool(workers, reps, |rep| {
        let mut rng = replicate_rng(seed, rep as u64);
        let (x, y) = cfg.model.generate(cfg.n_total, &mut rng);
        let mut out = Vec::with_capacity(cfg.ks.len());
        for &k in &cfg.ks {
            let n_k = cfg.n_total / k;
            let mut cee = CeeState::new(p, VarianceKind::ModelBased);
            let mut cuee = CueeState::new(p, VarianceKind::ModelBased);
            for c in 0..k {
                let (xc, yc) = slice_rows(&x, &y, c * n_k, n_k);
                let fit = irls_solve(&xc, &yc, family, &vec![0.0; p], &irls)?;
                cee.update(&fit, &xc, &yc, family)?;
                cuee.update_with_fit(fit, &xc, &yc, family, &irls)?;
            }
            let cee_rmse = cee
                .beta()
                .map(|b| rmse(b, &cfg.model.beta))
                .unwrap_or(f64::NAN);
            let cuee_rmse = cuee
                .beta_tilde()
                .map(|b| rmse(b, &cfg.model.beta))
                .unwrap_or(f64::NAN);
            out.push((cee_rmse, cuee_rmse));
        }
        Ok(out)
    });
    let mut table = Table::new(&[
        "k",
        "n_k",
        "rmse_cee",
        "rmse_cee_se",
        "rmse_cuee",
        "rmse_cuee_se",
    ]);
    let mut acc: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); cfg.ks.len()];
    for r in per_rep {
        for (slot, (ce, cu)) in r?.into_iter().enumerate() {
            acc[slot].0.push(ce);
            acc[slot].1.push(cu);
        }
    }
    for (slot, &k) in cfg.ks.iter().enumerate() {
        let (ce, cu) = &acc[slot];
        let (cm, cs) = mean_se(ce);
        let (um, us) = mean_se(cu);
        table.push(vec![
            k.to_string(),
            (cfg.n_total / k).to_string(),
            fmt(cm),
            fmt(cs),
            fmt(um),
            fmt(us),
        ]);
    }
    Ok(table)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn slice_rows(x: &Matrix, y: &[f64], start: usize, len: usize) -> (Matrix, Vec<f64>) {
    let p = x.cols();
    let mut xc = Matrix::zeros(len, p);
    for i in 0..len {
        for j in 0..p {
            xc.set(i, j, x.get(start + i, j));
        }
    }
    (xc, y[start..start + len].to_vec())
}

// ---------------------------------------------------------------------------
// robust Poisson bias / RMSE ratios
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonBiasConfig {
    pub k: usize,
    pub n_ks: Vec<usize>,
    pub beta: Vec<f64>,
    pub covariates: Vec<CovariateKind>,
}

impl Default for PoissonBiasConfig {
    fn default() -> Self {
        PoissonBiasConfig {
            k: 100,
            n_ks: vec![50, 100, 500],
            beta: vec![0.3, -0.3, 0.3, -0.3, 0.3],
            covariates: vec![
                CovariateKind::Intercept,
                CovariateKind::Normal,
                CovariateKind::Normal,
                CovariateKind::Bernoulli(0.25),
                CovariateKind::Bernoulli(0.1),
            ],
        }
    }
}

/// Coefficient-wise bias and RMSE of CEE/CUEE against the pooled EE fit for
/// the robust Poisson design.
pub fn run_poisson_bias(
    cfg: &PoissonBiasConfig,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Table> {
    validate_ee_generator(&cfg.covariates, seed)?;
    let p = cfg.beta.len();
    let family = EeFamily::Poisson;
    let irls = IrlsConfig {
        variance: VarianceKind::Robust,
        ..IrlsConfig::default()
    };
    let mut table = Table::new(&[
        "n_k",
        "coef",
        "bias_cee",
        "bias_cuee",
        "bias_ee",
        "rmse_cee",
        "rmse_cuee",
        "rmse_ee",
        "ratio_cee_ee",
        "ratio_cuee_ee",
    ]);
    for (cell, &n_k) in cfg.n_ks.iter().enumerate() {
        let per_rep: Vec<Result<[Vec<f64>; 3]>> = run_pool(workers, reps, |rep| {
            let mut rng = replicate_rng(seed, ((cell as u64) << 32) | rep as u64);
            let n_total = cfg.k * n_k;
            let x = gen_design(&cfg.covariates, n_total, &mut rng);
            let y = gen_response(&x, &cfg.beta, &family, &mut rng);
            let mut cee = CeeState::new(p, VarianceKind::Robust);
            let mut cuee = CueeState::new(p, VarianceKind::Robust);
            for c in 0..cfg.k {
                let (xc, yc) = slice_rows(&x, &y, c * n_k, n_k);
                let fit = irls_solve(&xc, &yc, &family, &vec![0.0; p], &irls)?;
                cee.update(&fit, &xc, &yc, &family)?;
                cuee.update_with_fit(fit, &xc, &yc, &family, &irls)?;
            }
            let pooled = irls_solve(&x, &y, &family, &vec![0.0; p], &irls)?;
            let cee_beta = cee
                .beta()
                .ok_or_else(|| Error::SingularCumulative("CEE unavailable".into()))?
                .to_vec();
            let cuee_beta = cuee
                .beta_tilde()
                .ok_or_else(|| Error::SingularCumulative("CUEE unavailable".into()))?
                .to_vec();
            Ok([cee_beta, cuee_beta, pooled.beta_sub])
        });
        // per-coefficient accumulation of bias and squared error
        let mut bias = [vec![0.0; p], vec![0.0; p], vec![0.0; p]];
        let mut sq = [vec![0.0; p], vec![0.0; p], vec![0.0; p]];
        let mut count = 0.0;
        for r in per_rep {
            let estimates = r?;
            count += 1.0;
            for (which, est) in estimates.iter().enumerate() {
                for j in 0..p {
                    let d = est[j] - cfg.beta[j];
                    bias[which][j] += d;
                    sq[which][j] += d * d;
                }
            }
        }
        for j in 0..p {
            let b: Vec<f64> = (0..3).map(|w| bias[w][j] / count).collect();
            let r: Vec<f64> = (0..3).map(|w| (sq[w][j] / count).sqrt()).collect();
            table.push(vec![
                n_k.to_string(),
                format!("beta{}", j + 1),
                fmt(b[0]),
                fmt(b[1]),
                fmt(b[2]),
                fmt(r[0]),
                fmt(r[1]),
                fmt(r[2]),
                fmt(r[0] / r[2]),
                fmt(r[1] / r[2]),
            ]);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// generalized-inverse invariance under rank-deficient chunk ordering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GinvInvarianceConfig {
    pub n_total: usize,
    pub k: usize,
    pub beta: Vec<f64>,
    pub covariates: Vec<CovariateKind>,
    /// Column whose sorted ordering produces rank-deficient chunks.
    pub binary_column: usize,
}

impl Default for GinvInvarianceConfig {
    fn default() -> Self {
        GinvInvarianceConfig {
            n_total: 20_000,
            k: 10,
            beta: vec![1.0; 5],
            covariates: vec![
                CovariateKind::Intercept,
                CovariateKind::Bernoulli(0.5),
                CovariateKind::Normal,
                CovariateKind::Normal,
                CovariateKind::Normal,
            ],
            binary_column: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GinvInvarianceSummary {
    pub table: Table,
    /// Largest coefficient gap between the two generalized inverses across
    /// all replicates.
    pub max_ginv_gap: f64,
}

/// Run CUEE under two generalized inverses on a rank-deficient chunk ordering,
/// next to the full-rank ordering and the pooled EE fit.
pub fn run_ginv_invariance(
    cfg: &GinvInvarianceConfig,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<GinvInvarianceSummary> {
    if cfg.n_total % cfg.k != 0 {
        return Err(Error::OutOfRange(format!(
            "n_total = {} is not divisible by K = {}",
            cfg.n_total, cfg.k
        )));
    }
    validate_ee_generator(&cfg.covariates, seed)?;
    let p = cfg.beta.len();
    let family = EeFamily::Logistic;
    let n_k = cfg.n_total / cfg.k;

    let per_rep: Vec<Result<([Vec<f64>; 4], f64)>> = run_pool(workers, reps, |rep| {
        let mut rng = replicate_rng(seed, rep as u64);
        let x = gen_design(&cfg.covariates, cfg.n_total, &mut rng);
        let y = gen_response(&x, &cfg.beta, &family, &mut rng);

        // grouped ordering: all zeros of the binary covariate first
        let mut order: Vec<usize> = (0..cfg.n_total).collect();
        order.sort_by(|&a, &b| {
            x.get(a, cfg.binary_column)
                .total_cmp(&x.get(b, cfg.binary_column))
                .then(a.cmp(&b))
        });
        let mut xg = Matrix::zeros(cfg.n_total, p);
        let mut yg = vec![0.0; cfg.n_total];
        for (i, &src) in order.iter().enumerate() {
            for j in 0..p {
                xg.set(i, j, x.get(src, j));
            }
            yg[i] = y[src];
        }

        let run_cuee = |xd: &Matrix, yd: &[f64], kind: GinvKind| -> Result<Vec<f64>> {
            let irls = IrlsConfig {
                ginv: kind,
                variance: VarianceKind::ModelBased,
                ..IrlsConfig::default()
            };
            let mut cuee = CueeState::new(p, VarianceKind::ModelBased);
            for c in 0..cfg.k {
                let (xc, yc) = slice_rows(xd, yd, c * n_k, n_k);
                cuee.update(&xc, &yc, &family, &irls)?;
            }
            Ok(cuee
                .beta_tilde()
                .ok_or_else(|| Error::SingularCumulative("CUEE unavailable".into()))?
                .to_vec())
        };

        let grouped_mp = run_cuee(&xg, &yg, GinvKind::MoorePenrose)?;
        let grouped_rao = run_cuee(&xg, &yg, GinvKind::Rao)?;
        let full_rank = run_cuee(&x, &y, GinvKind::MoorePenrose)?;
        let pooled = irls_solve(
            &x,
            &y,
            &family,
            &vec![0.0; p],
            &IrlsConfig::for_family(&family),
        )?
        .beta_sub;
        let gap = grouped_mp
            .iter()
            .zip(&grouped_rao)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(([grouped_mp, grouped_rao, full_rank, pooled], gap))
    });

    let mut sums = [vec![0.0; p], vec![0.0; p], vec![0.0; p], vec![0.0; p]];
    let mut sq = [vec![0.0; p], vec![0.0; p], vec![0.0; p], vec![0.0; p]];
    let mut max_gap = 0.0_f64;
    let mut count = 0.0;
    for r in per_rep {
        let (estimates, gap) = r?;
        max_gap = max_gap.max(gap);
        count += 1.0;
        for (which, est) in estimates.iter().enumerate() {
            for j in 0..p {
                sums[which][j] += est[j];
                sq[which][j] += est[j] * est[j];
            }
        }
    }
    let mut table = Table::new(&[
        "coef",
        "cuee_ginv_mp",
        "cuee_ginv_mp_se",
        "cuee_ginv_rao",
        "cuee_ginv_rao_se",
        "cuee_full_rank",
        "cuee_full_rank_se",
        "ee",
        "ee_se",
        "max_ginv_gap",
    ]);
    for j in 0..p {
        let mut row = vec![format!("beta{}", j + 1)];
        for which in 0..4 {
            let mean = sums[which][j] / count;
            let var = (sq[which][j] / count - mean * mean).max(0.0);
            row.push(fmt(mean));
            row.push(fmt((var / count).sqrt()));
        }
        row.push(format!("{max_gap:.3e}"));
        table.push(row);
    }
    Ok(GinvInvarianceSummary {
        table,
        max_ginv_gap: max_gap,
    })
}
