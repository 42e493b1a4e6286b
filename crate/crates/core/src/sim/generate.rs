//! Random data generators for the simulation studies.
//!
//! All generators draw from a counter-based RNG (ChaCha8) with one stream per
//! replicate, so parallel replication is order independent and every run is
//! reproducible from `(config, seed)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkern::Matrix;

/// RNG for one replicate: a dedicated stream of the seeded generator.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Error law for the linear-model studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ErrorKind {
    Normal,
    SkewT { nu: f64, gamma: f64 },
}

impl ErrorKind {
    pub fn label(&self) -> String {
        match self {
            ErrorKind::Normal => "normal".into(),
            ErrorKind::SkewT { nu, gamma } => format!("skew_t(nu={nu},gamma={gamma})"),
        }
    }
}

/// Two-piece skew-t sampler, standardized to mean zero and unit variance.
///
/// The density is `2/(gamma + 1/gamma) f(gamma x)` for `x < 0` and
/// `2/(gamma + 1/gamma) f(x/gamma)` for `x >= 0`, with `f` the t density with
/// `nu` degrees of freedom. Raw moments follow from the half-t moments
/// `M_r = E|T|^r`:
///
/// `E X   = M_1 (gamma - 1/gamma)`
/// `E X^2 = M_2 (gamma^3 + gamma^-3)/(gamma + 1/gamma)`
///
/// with `M_1 = 2 sqrt(nu) G((nu+1)/2) / (sqrt(pi) (nu-1) G(nu/2))` and
/// `M_2 = nu/(nu-2)`.
#[derive(Debug, Clone, Copy)]
pub struct SkewT {
    nu: f64,
    gamma: f64,
    mean: f64,
    sd: f64,
    right_prob: f64,
}

/// Raw (unstandardized) mean and variance of the two-piece skew-t law.
pub fn skew_t_raw_moments(nu: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(nu > 2.0) {
        return Err(Error::OutOfRange(format!(
            "skew-t needs nu > 2 for a finite variance, got {nu}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::OutOfRange(format!(
            "skew-t skewing parameter must be positive, got {gamma}"
        )));
    }
    let m1 = 2.0 * nu.sqrt() * gamma_fn(0.5 * (nu + 1.0))
        / (std::f64::consts::PI.sqrt() * (nu - 1.0) * gamma_fn(0.5 * nu));
    let m2 = nu / (nu - 2.0);
    let mean = m1 * (gamma - 1.0 / gamma);
    let second = m2 * (gamma.powi(3) + gamma.powi(-3)) / (gamma + 1.0 / gamma);
    Ok((mean, second - mean * mean))
}

fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

impl SkewT {
    pub fn new(nu: f64, gamma: f64) -> Result<SkewT> {
        let (mean, var) = skew_t_raw_moments(nu, gamma)?;
        Ok(SkewT {
            nu,
            gamma,
            mean,
            sd: var.sqrt(),
            right_prob: gamma * gamma / (1.0 + gamma * gamma),
        })
    }

    /// One standardized draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t: f64 = StudentT::new(self.nu).expect("validated nu").sample(rng);
        let raw = if rng.gen_bool(self.right_prob) {
            self.gamma * t.abs()
        } else {
            -t.abs() / self.gamma
        };
        (raw - self.mean) / self.sd
    }
}

/// `n` standardized skew-t draws from a fresh stream of `seed`.
pub fn gen_skew_t(nu: f64, gamma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let st = SkewT::new(nu, gamma)?;
    let mut rng = replicate_rng(seed, 0);
    Ok((0..n).map(|_| st.sample(&mut rng)).collect())
}

fn sample_error<R: Rng + ?Sized>(kind: ErrorKind, skew: Option<&SkewT>, rng: &mut R) -> f64 {
    match kind {
        ErrorKind::Normal => StandardNormal.sample(rng),
        ErrorKind::SkewT { .. } => skew.expect("skew sampler prepared").sample(rng),
    }
}

/// Configuration of the outlier-injection stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutlierSimConfig {
    /// Regression coefficients; the first column is an intercept.
    pub beta: Vec<f64>,
    /// Index (1-based) of the chunk that receives outliers.
    pub k_star: usize,
    /// Rows per chunk.
    pub n_k: usize,
    /// Outlier strength; zero disables contamination.
    pub delta: f64,
    pub error_kind: ErrorKind,
    /// Per-row contamination probability inside chunk `k_star`.
    pub contamination_rate: f64,
}

impl Default for OutlierSimConfig {
    fn default() -> Self {
        OutlierSimConfig {
            beta: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            k_star: 5,
            n_k: 100,
            delta: 0.0,
            error_kind: ErrorKind::Normal,
            contamination_rate: 0.05,
        }
    }
}

/// One generated chunk with ground-truth outlier labels.
#[derive(Debug, Clone)]
pub struct OutlierChunk {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub outlier: Vec<bool>,
}

/// Generate chunks `1..=k_star`: all clean except the last, whose rows are
/// independently contaminated with additive `delta * Exp(1)` noise.
pub fn gen_outlier_stream<R: Rng + ?Sized>(
    cfg: &OutlierSimConfig,
    rng: &mut R,
) -> Result<Vec<OutlierChunk>> {
    if cfg.k_star == 0 || cfg.n_k == 0 {
        return Err(Error::OutOfRange("k_star and n_k must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.contamination_rate) || cfg.delta < 0.0 {
        return Err(Error::OutOfRange(
            "contamination rate must lie in [0,1] and delta must be nonnegative".into(),
        ));
    }
    let skew = match cfg.error_kind {
        ErrorKind::SkewT { nu, gamma } => Some(SkewT::new(nu, gamma)?),
        ErrorKind::Normal => None,
    };
    let p = cfg.beta.len();
    let mut chunks = Vec::with_capacity(cfg.k_star);
    for k in 1..=cfg.k_star {
        let contaminate = k == cfg.k_star && cfg.delta > 0.0;
        let mut x = Matrix::zeros(cfg.n_k, p);
        let mut y = Vec::with_capacity(cfg.n_k);
        let mut outlier = Vec::with_capacity(cfg.n_k);
        for i in 0..cfg.n_k {
            x.set(i, 0, 1.0);
            let mut eta = cfg.beta[0];
            for j in 1..p {
                let v: f64 = StandardNormal.sample(rng);
                x.set(i, j, v);
                eta += cfg.beta[j] * v;
            }
            let mut value = eta + sample_error(cfg.error_kind, skew.as_ref(), rng);
            let is_outlier = contaminate && rng.gen_bool(cfg.contamination_rate);
            if is_outlier {
                let shock: f64 = Exp1.sample(rng);
                value += cfg.delta * shock;
            }
            y.push(value);
            outlier.push(is_outlier);
        }
        chunks.push(OutlierChunk { x, y, outlier });
    }
    Ok(chunks)
}

/// Covariate column spec for the estimating-equation designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
pub enum CovariateKind {
    Intercept,
    Normal,
    Bernoulli(f64),
}

impl CovariateKind {
    pub fn mean(&self) -> f64 {
        match self {
            CovariateKind::Intercept => 1.0,
            CovariateKind::Normal => 0.0,
            CovariateKind::Bernoulli(p) => *p,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            CovariateKind::Intercept => 0.0,
            CovariateKind::Normal => 1.0,
            CovariateKind::Bernoulli(p) => p * (1.0 - p),
        }
    }
}

/// Design + response generator for a GLM-type family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EeSimConfig {
    pub family: crate::ee::EeFamily,
    pub beta: Vec<f64>,
    pub covariates: Vec<CovariateKind>,
}

impl EeSimConfig {
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Matrix, Vec<f64>) {
        let x = gen_design(&self.covariates, n, rng);
        let y = gen_response(&x, &self.beta, &self.family, rng);
        (x, y)
    }
}

pub fn gen_design<R: Rng + ?Sized>(
    covariates: &[CovariateKind],
    n: usize,
    rng: &mut R,
) -> Matrix {
    let p = covariates.len();
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        for (j, kind) in covariates.iter().enumerate() {
            let v = match kind {
                CovariateKind::Intercept => 1.0,
                CovariateKind::Normal => StandardNormal.sample(rng),
                CovariateKind::Bernoulli(p) => f64::from(rng.gen_bool(*p)),
            };
            x.set(i, j, v);
        }
    }
    x
}

/// Draw responses from the family's mean function at `X beta`.
pub fn gen_response<R: Rng + ?Sized>(
    x: &Matrix,
    beta: &[f64],
    family: &crate::ee::EeFamily,
    rng: &mut R,
) -> Vec<f64> {
    use crate::ee::EeFamily;
    let eta = x.matvec(beta);
    eta.iter()
        .map(|&e| {
            let mu = family.mean(e);
            match family {
                EeFamily::Logistic => f64::from(rng.gen_bool(mu)),
                EeFamily::Poisson => {
                    let pois = rand_distr::Poisson::new(mu.max(f64::MIN_POSITIVE))
                        .expect("positive poisson mean");
                    pois.sample(rng)
                }
                EeFamily::Quasi(_) => {
                    let noise: f64 = StandardNormal.sample(rng);
                    mu + noise
                }
            }
        })
        .collect()
}

/// Check sample moments of every covariate column against the analytic values
/// (4 standard errors). Guards each runner against mis-wired generators.
pub fn validate_covariate_moments(x: &Matrix, spec: &[CovariateKind]) -> Result<()> {
    let n = x.rows();
    if n < 100 {
        return Err(Error::InsufficientData { need: 100, have: n });
    }
    for (j, kind) in spec.iter().enumerate() {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let v = x.get(i, j);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let expect_mean = kind.mean();
        let expect_var = kind.variance();
        let mean_se = (expect_var / n as f64).sqrt();
        if (mean - expect_mean).abs() > 4.0 * mean_se + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "column {j} sample mean {mean:.4} drifted from {expect_mean:.4}"
            )));
        }
        // crude SE for the sample variance; adequate as a wiring check
        let var_se = expect_var * (2.0 / n as f64).sqrt() + 1e-12;
        if (var - expect_var).abs() > 6.0 * var_se {
            return Err(Error::OutOfRange(format!(
                "column {j} sample variance {var:.4} drifted from {expect_var:.4}"
            )));
        }
    }
    Ok(())
}
