//! Online-updated estimating equations for GLM-type score functions.
//!
//! Each chunk is solved by IRLS (Newton–Raphson written as reweighted least
//! squares), tolerating rank-deficient chunk designs through a generalized
//! inverse: the fitted linear predictor is unique regardless of which
//! generalized inverse is used, so the cumulative estimators below are too.
//!
//! Two cumulative estimators are maintained between accumulation points:
//!
//! * CEE: `beta_k = (A_{k-1} + A_{n_k,k})^{-1}(A_{k-1}beta_{k-1} + A_{n_k,k}beta_{n_k,k})`,
//!   algebraically equal at the terminal point to the one-shot aggregated
//!   combination of the subset fits.
//! * CUEE: adds an intermediary estimator `beta_check` and the score
//!   correction `M(beta_check)`, trading a second per-chunk score evaluation
//!   for substantially less finite-sample bias when chunks are small.

mod family;

use serde::{Deserialize, Serialize};

pub use family::{EeFamily, LinkFn};

use crate::dist::chi2_upper;
use crate::error::{Error, Result};
use crate::numkern::{
    default_rank_tol, dot, ginv, rank_detect, syr, GinvKind, Matrix, SpdFactor,
};

/// Which covariance estimator to maintain for the cumulative estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// Inverse of the cumulative information, `A_K^{-1}`.
    ModelBased,
    /// Sandwich form with the score outer-product meat.
    Robust,
}

impl VarianceKind {
    /// Robust for count models, model-based for logistic.
    pub fn default_for(family: &EeFamily) -> VarianceKind {
        match family {
            EeFamily::Logistic => VarianceKind::ModelBased,
            EeFamily::Poisson | EeFamily::Quasi(_) => VarianceKind::Robust,
        }
    }
}

/// IRLS and generalized-inverse configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IrlsConfig {
    /// Convergence threshold on the max-norm change of the linear predictor.
    pub tol: f64,
    pub max_iter: usize,
    /// Generalized inverse used on rank-deficient systems.
    pub ginv: GinvKind,
    /// Rank cutoff relative to the largest singular value; `None` picks the
    /// conservative default for the dimension.
    pub rank_tol: Option<f64>,
    /// Start subset solves from the cumulative estimate instead of zero.
    /// Off by default: it changes the subset estimates and hence the
    /// finite-sample values of the cumulative estimators.
    pub warm_start: bool,
    pub variance: VarianceKind,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig {
            tol: 1e-8,
            max_iter: 50,
            ginv: GinvKind::MoorePenrose,
            rank_tol: None,
            warm_start: false,
            variance: VarianceKind::Robust,
        }
    }
}

impl IrlsConfig {
    pub fn for_family(family: &EeFamily) -> IrlsConfig {
        IrlsConfig {
            variance: VarianceKind::default_for(family),
            ..IrlsConfig::default()
        }
    }

    fn rank_tol_for(&self, p: usize) -> f64 {
        self.rank_tol.unwrap_or_else(|| default_rank_tol(p))
    }
}

/// Result of one subset IRLS solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetFit {
    pub beta_sub: Vec<f64>,
    /// Negative score Jacobian `A_{n_k,k}` at the solution.
    pub a_mat: Matrix,
    /// Score outer-product sum at the solution.
    pub meat: Matrix,
    /// Subset variance estimate (model-based or sandwich).
    pub v_sub: Matrix,
    pub rank: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Logistic fit drifted to fitted probabilities pinned at 0/1,
    /// the numerical signature of (quasi-)complete separation; callers may
    /// merge chunks until it clears.
    pub separated: bool,
    pub n: usize,
}

/// Score and negative Jacobian at an arbitrary coefficient value.
#[derive(Debug, Clone)]
pub struct ScoreEval {
    /// `M(beta) = X'S'W(y - mu)`
    pub m_vec: Vec<f64>,
    /// `A(beta) = X'S'WSX`
    pub a_mat: Matrix,
}

pub fn score_eval(x: &Matrix, y: &[f64], family: &EeFamily, beta: &[f64]) -> Result<ScoreEval> {
    if x.rows() != y.len() || x.cols() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "score_eval on {}x{} design with {} responses, {} coefficients",
            x.rows(),
            x.cols(),
            y.len(),
            beta.len()
        )));
    }
    if !beta.iter().all(|b| b.is_finite()) {
        return Err(Error::NonFinite("coefficient".into()));
    }
    let eta = x.matvec(beta);
    for &e in &eta {
        family.check_eta(e)?;
    }
    let mut wbar = Vec::with_capacity(eta.len());
    let mut score_resid = Vec::with_capacity(eta.len());
    for (i, &e) in eta.iter().enumerate() {
        wbar.push(family.working_weight(e));
        score_resid.push(family.psi_scale(e) * (y[i] - family.mean(e)));
    }
    let a_mat = x.gram_weighted(&wbar);
    let m_vec = x.tr_matvec(&score_resid);
    Ok(ScoreEval { m_vec, a_mat })
}

fn solve_psd(a: &Matrix, rhs: &[f64], cfg: &IrlsConfig) -> (Vec<f64>, bool) {
    match SpdFactor::new(a) {
        Ok(f) => (f.solve_vec(rhs), true),
        Err(_) => (
            ginv(a, cfg.ginv, cfg.rank_tol_for(a.rows())).matvec(rhs),
            false,
        ),
    }
}

fn psd_inverse_or_ginv(a: &Matrix, cfg: &IrlsConfig) -> Matrix {
    match SpdFactor::new(a) {
        Ok(f) => f.inverse(),
        Err(_) => ginv(a, cfg.ginv, cfg.rank_tol_for(a.rows())),
    }
}

/// Fitted probabilities this close to 0/1 count as saturated for the
/// separation check.
const SEPARATION_PROB_EPS: f64 = 1e-10;
/// Looser probability band applied when the solve also failed to converge;
/// a separated iterate capped by `max_iter` sits here long before saturating.
const SEPARATION_DRIFT_EPS: f64 = 1e-6;

/// Solve the subset estimating equation by iteratively reweighted least
/// squares. Convergence is declared on the linear predictor
/// (`max |eta_t - eta_{t-1}| < tol`), which stays well defined under rank
/// deficiency. A non-converged solve returns the best iterate with
/// `converged = false` rather than failing.
pub fn irls_solve(
    x: &Matrix,
    y: &[f64],
    family: &EeFamily,
    beta_init: &[f64],
    cfg: &IrlsConfig,
) -> Result<SubsetFit> {
    if x.rows() == 0 {
        return Err(Error::InsufficientData { need: 1, have: 0 });
    }
    if x.rows() != y.len() || x.cols() != beta_init.len() {
        return Err(Error::DimensionMismatch(format!(
            "irls on {}x{} design with {} responses, {} initial coefficients",
            x.rows(),
            x.cols(),
            y.len(),
            beta_init.len()
        )));
    }
    let n = x.rows();
    let p = x.cols();
    let mut beta = beta_init.to_vec();
    let mut eta = x.matvec(&beta);
    let mut converged = false;
    let mut iterations = 0;

    let mut wbar = vec![0.0; n];
    let mut work = vec![0.0; n];
    for t in 1..=cfg.max_iter {
        iterations = t;
        for i in 0..n {
            let e = eta[i];
            let w = family.working_weight(e);
            wbar[i] = w;
            // X'WbarZ assembled without dividing by S:
            // Wbar*eta + S*W*(y - mu) per observation
            work[i] = w * e + family.psi_scale(e) * (y[i] - family.mean(e));
        }
        let a = x.gram_weighted(&wbar);
        let rhs = x.tr_matvec(&work);
        let (beta_new, _) = solve_psd(&a, &rhs, cfg);
        let eta_new = x.matvec(&beta_new);
        let delta = eta
            .iter()
            .zip(&eta_new)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        beta = beta_new;
        eta = eta_new;
        if !delta.is_finite() {
            break;
        }
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    // final quantities at the returned iterate
    let mut score_resid = vec![0.0; n];
    let mut saturated = false;
    let mut drifted = false;
    for i in 0..n {
        let e = eta[i];
        wbar[i] = family.working_weight(e);
        let mu = family.mean(e);
        score_resid[i] = family.psi_scale(e) * (y[i] - mu);
        if family.can_separate() {
            saturated |= !(SEPARATION_PROB_EPS..=1.0 - SEPARATION_PROB_EPS).contains(&mu);
            drifted |= !(SEPARATION_DRIFT_EPS..=1.0 - SEPARATION_DRIFT_EPS).contains(&mu);
        }
    }
    let a_mat = x.gram_weighted(&wbar);
    let mut meat = Matrix::zeros(p, p);
    for i in 0..n {
        syr(&mut meat, score_resid[i] * score_resid[i], x.row(i));
    }
    // Complete separation drives the score to zero as the estimate diverges,
    // so only the fitted probabilities identify it: either fully saturated in
    // double precision, or still drifting outward when the iteration cap hit.
    let separated = saturated || (!converged && drifted);
    let rank = rank_detect(&a_mat, cfg.rank_tol_for(p));

    let v_sub = match cfg.variance {
        VarianceKind::ModelBased => psd_inverse_or_ginv(&a_mat, cfg),
        VarianceKind::Robust => {
            let bread = psd_inverse_or_ginv(&a_mat, cfg);
            let mut v = bread.matmul(&meat).matmul(&bread.transpose());
            v.symmetrize();
            v
        }
    };

    Ok(SubsetFit {
        beta_sub: beta,
        a_mat,
        meat,
        v_sub,
        rank,
        converged,
        iterations,
        separated,
        n,
    })
}

fn meat_at(x: &Matrix, y: &[f64], family: &EeFamily, beta: &[f64]) -> Result<Matrix> {
    let eta = x.matvec(beta);
    let p = x.cols();
    let mut meat = Matrix::zeros(p, p);
    for i in 0..x.rows() {
        let e = eta[i];
        family.check_eta(e)?;
        let r = family.psi_scale(e) * (y[i] - family.mean(e));
        syr(&mut meat, r * r, x.row(i));
    }
    Ok(meat)
}

/// Outcome of folding a chunk into a cumulative EE state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeUpdateOutcome {
    Updated,
    /// Cumulative information still singular; estimate deferred.
    Deferred,
}

/// Cumulative estimating equation estimator (CEE).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CeeState {
    p: usize,
    a_cum: Matrix,
    beta: Option<Vec<f64>>,
    /// Accumulated `sum A_{n_l,l} beta_{n_l,l}` while the cumulative
    /// information is still singular.
    rhs_defer: Vec<f64>,
    meat_cum: Matrix,
    v: Option<Matrix>,
    variance: VarianceKind,
    chunks_seen: usize,
    n_total: usize,
}

impl CeeState {
    pub fn new(p: usize, variance: VarianceKind) -> CeeState {
        CeeState {
            p,
            a_cum: Matrix::zeros(p, p),
            beta: None,
            rhs_defer: vec![0.0; p],
            meat_cum: Matrix::zeros(p, p),
            v: None,
            variance,
            chunks_seen: 0,
            n_total: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn chunks_seen(&self) -> usize {
        self.chunks_seen
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn a_cum(&self) -> &Matrix {
        &self.a_cum
    }

    pub fn beta(&self) -> Option<&[f64]> {
        self.beta.as_deref()
    }

    pub fn v(&self) -> Option<&Matrix> {
        self.v.as_ref()
    }

    pub fn variance_kind(&self) -> VarianceKind {
        self.variance
    }

    pub fn is_deferred(&self) -> bool {
        self.chunks_seen > 0 && self.beta.is_none()
    }

    /// Fold one subset fit into the cumulative estimator. The chunk data is
    /// needed only when the chunk was rank deficient and the robust variance
    /// is maintained, in which case the meat term is re-evaluated at the new
    /// cumulative estimate.
    pub fn update(
        &mut self,
        fit: &SubsetFit,
        x: &Matrix,
        y: &[f64],
        family: &EeFamily,
    ) -> Result<EeUpdateOutcome> {
        if fit.a_mat.rows() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "state has p = {}, fit has p = {}",
                self.p,
                fit.a_mat.rows()
            )));
        }
        let a_beta_sub = fit.a_mat.matvec(&fit.beta_sub);
        let mut rhs = match &self.beta {
            Some(b) => self.a_cum.matvec(b),
            None => self.rhs_defer.clone(),
        };
        for (r, v) in rhs.iter_mut().zip(&a_beta_sub) {
            *r += v;
        }
        self.a_cum.add_assign(&fit.a_mat);
        self.a_cum.symmetrize();
        self.chunks_seen += 1;
        self.n_total += fit.n;

        match SpdFactor::new(&self.a_cum) {
            Ok(factor) => {
                let beta_new = factor.solve_vec(&rhs);
                if self.variance == VarianceKind::Robust {
                    let full_rank = fit.rank == self.p;
                    let inc = if full_rank {
                        fit.a_mat.matmul(&fit.v_sub).matmul(&fit.a_mat.transpose())
                    } else {
                        meat_at(x, y, family, &beta_new)?
                    };
                    self.meat_cum.add_assign(&inc);
                    self.meat_cum.symmetrize();
                    let bread = factor.inverse();
                    let mut v = bread.matmul(&self.meat_cum).matmul(&bread.transpose());
                    v.symmetrize();
                    self.v = Some(v);
                } else {
                    self.v = Some(factor.inverse());
                }
                self.beta = Some(beta_new);
                self.rhs_defer = vec![0.0; self.p];
                Ok(EeUpdateOutcome::Updated)
            }
            Err(_) => {
                // cumulative information still singular; keep accumulating.
                // The meat increment falls back to the subset fit's own meat:
                // no cumulative estimate exists to evaluate the score at.
                if self.variance == VarianceKind::Robust {
                    let inc = if fit.rank == self.p {
                        fit.a_mat.matmul(&fit.v_sub).matmul(&fit.a_mat.transpose())
                    } else {
                        fit.meat.clone()
                    };
                    self.meat_cum.add_assign(&inc);
                    self.meat_cum.symmetrize();
                }
                self.rhs_defer = rhs;
                self.beta = None;
                self.v = None;
                Ok(EeUpdateOutcome::Deferred)
            }
        }
    }

    pub fn wald(&self, c: &Matrix) -> Result<WaldTest> {
        let beta = self.beta.as_deref().ok_or_else(|| {
            Error::SingularCumulative("CEE estimate unavailable".into())
        })?;
        let v = self.v.as_ref().ok_or_else(|| {
            Error::SingularCumulative("CEE variance unavailable".into())
        })?;
        wald_global(beta, v, c)
    }

    pub fn coef_tests(&self) -> Result<Vec<CoefZTest>> {
        let beta = self.beta.as_deref().ok_or_else(|| {
            Error::SingularCumulative("CEE estimate unavailable".into())
        })?;
        let v = self.v.as_ref().ok_or_else(|| {
            Error::SingularCumulative("CEE variance unavailable".into())
        })?;
        Ok(wald_coefs(beta, v))
    }
}

/// Per-chunk quantities produced by a CUEE update; the terminal one-shot
/// combination can be rebuilt from these.
#[derive(Debug, Clone)]
pub struct CueeChunkRecord {
    pub fit: SubsetFit,
    /// Intermediary estimator for this chunk.
    pub beta_check: Vec<f64>,
    /// `A_{n_k,k}(beta_check)`
    pub a_tilde_chunk: Matrix,
    /// `M_{n_k,k}(beta_check)`
    pub m_check: Vec<f64>,
}

/// Cumulatively updated estimating equation estimator (CUEE).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CueeState {
    p: usize,
    a_tilde_cum: Matrix,
    /// `a_k = sum A~_{n_l,l} beta_check_l`
    a_vec: Vec<f64>,
    /// `b_k = sum M_{n_l,l}(beta_check_l)`
    b_vec: Vec<f64>,
    /// Most recent intermediary estimator.
    beta_check: Vec<f64>,
    beta_tilde: Option<Vec<f64>>,
    meat_cum: Matrix,
    v_tilde: Option<Matrix>,
    variance: VarianceKind,
    /// Whether the cumulative information was invertible at the last update;
    /// while false, estimates come from a generalized inverse and are not yet
    /// unique.
    cumulative_full_rank: bool,
    chunks_seen: usize,
    n_total: usize,
}

impl CueeState {
    pub fn new(p: usize, variance: VarianceKind) -> CueeState {
        CueeState {
            p,
            a_tilde_cum: Matrix::zeros(p, p),
            a_vec: vec![0.0; p],
            b_vec: vec![0.0; p],
            beta_check: vec![0.0; p],
            beta_tilde: None,
            meat_cum: Matrix::zeros(p, p),
            v_tilde: None,
            variance,
            cumulative_full_rank: false,
            chunks_seen: 0,
            n_total: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn chunks_seen(&self) -> usize {
        self.chunks_seen
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn a_tilde_cum(&self) -> &Matrix {
        &self.a_tilde_cum
    }

    pub fn beta_tilde(&self) -> Option<&[f64]> {
        self.beta_tilde.as_deref()
    }

    pub fn beta_check(&self) -> &[f64] {
        &self.beta_check
    }

    pub fn v_tilde(&self) -> Option<&Matrix> {
        self.v_tilde.as_ref()
    }

    pub fn cumulative_full_rank(&self) -> bool {
        self.cumulative_full_rank
    }

    pub fn variance_kind(&self) -> VarianceKind {
        self.variance
    }

    /// Solve the chunk and fold it in.
    pub fn update(
        &mut self,
        x: &Matrix,
        y: &[f64],
        family: &EeFamily,
        cfg: &IrlsConfig,
    ) -> Result<CueeChunkRecord> {
        let init = if cfg.warm_start {
            self.beta_tilde.clone().unwrap_or_else(|| vec![0.0; self.p])
        } else {
            vec![0.0; self.p]
        };
        let fit = irls_solve(x, y, family, &init, cfg)?;
        self.update_with_fit(fit, x, y, family, cfg)
    }

    /// Fold a pre-computed subset fit in (callers that inspect the fit first,
    /// e.g. to merge separated chunks, use this entry point).
    pub fn update_with_fit(
        &mut self,
        fit: SubsetFit,
        x: &Matrix,
        y: &[f64],
        family: &EeFamily,
        cfg: &IrlsConfig,
    ) -> Result<CueeChunkRecord> {
        if fit.a_mat.rows() != self.p || x.cols() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "state has p = {}, chunk has p = {}",
                self.p,
                x.cols()
            )));
        }
        // intermediary estimator: (A~_{k-1} + A_{n_k,k})^{-}(a_{k-1} + A_{n_k,k} beta_sub)
        let mut mid = self.a_tilde_cum.add(&fit.a_mat);
        mid.symmetrize();
        let mut rhs_check = self.a_vec.clone();
        for (r, v) in rhs_check.iter_mut().zip(fit.a_mat.matvec(&fit.beta_sub)) {
            *r += v;
        }
        let (beta_check, _) = solve_psd(&mid, &rhs_check, cfg);

        // score and information at the intermediary estimator
        let se = score_eval(x, y, family, &beta_check)?;

        let mut bread_new = self.a_tilde_cum.add(&se.a_mat);
        bread_new.symmetrize();
        let a_inc = se.a_mat.matvec(&beta_check);
        let mut rhs_tilde = self.a_vec.clone();
        for ((r, ai), (bi, mi)) in rhs_tilde
            .iter_mut()
            .zip(&a_inc)
            .zip(self.b_vec.iter().zip(&se.m_vec))
        {
            *r += ai + bi + mi;
        }
        let (beta_tilde, full_rank) = match SpdFactor::new(&bread_new) {
            Ok(f) => (f.solve_vec(&rhs_tilde), true),
            Err(_) => (
                ginv(&bread_new, cfg.ginv, cfg.rank_tol_for(self.p)).matvec(&rhs_tilde),
                false,
            ),
        };

        // recursions
        for (a, v) in self.a_vec.iter_mut().zip(&a_inc) {
            *a += v;
        }
        for (b, v) in self.b_vec.iter_mut().zip(&se.m_vec) {
            *b += v;
        }
        self.a_tilde_cum = bread_new;
        self.beta_check = beta_check.clone();
        self.chunks_seen += 1;
        self.n_total += fit.n;
        self.cumulative_full_rank = full_rank;

        match self.variance {
            VarianceKind::Robust => {
                let inc = if fit.rank == self.p {
                    se.a_mat.matmul(&fit.v_sub).matmul(&se.a_mat.transpose())
                } else {
                    meat_at(x, y, family, &beta_tilde)?
                };
                self.meat_cum.add_assign(&inc);
                self.meat_cum.symmetrize();
                let bread_inv = psd_inverse_or_ginv(&self.a_tilde_cum, cfg);
                let mut v = bread_inv
                    .matmul(&self.meat_cum)
                    .matmul(&bread_inv.transpose());
                v.symmetrize();
                self.v_tilde = Some(v);
            }
            VarianceKind::ModelBased => {
                self.v_tilde = Some(psd_inverse_or_ginv(&self.a_tilde_cum, cfg));
            }
        }
        self.beta_tilde = Some(beta_tilde);
        Ok(CueeChunkRecord {
            fit,
            beta_check,
            a_tilde_chunk: se.a_mat,
            m_check: se.m_vec,
        })
    }

    pub fn wald(&self, c: &Matrix) -> Result<WaldTest> {
        let beta = self.beta_tilde.as_deref().ok_or_else(|| {
            Error::SingularCumulative("CUEE estimate unavailable".into())
        })?;
        let v = self.v_tilde.as_ref().ok_or_else(|| {
            Error::SingularCumulative("CUEE variance unavailable".into())
        })?;
        wald_global(beta, v, c)
    }

    pub fn coef_tests(&self) -> Result<Vec<CoefZTest>> {
        let beta = self.beta_tilde.as_deref().ok_or_else(|| {
            Error::SingularCumulative("CUEE estimate unavailable".into())
        })?;
        let v = self.v_tilde.as_ref().ok_or_else(|| {
            Error::SingularCumulative("CUEE variance unavailable".into())
        })?;
        Ok(wald_coefs(beta, v))
    }
}

/// Global Wald test of `C beta = 0` against chi-squared with `q` degrees of
/// freedom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaldTest {
    pub w: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Per-coefficient Wald z test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefZTest {
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
}

pub fn wald_global(beta: &[f64], v: &Matrix, c: &Matrix) -> Result<WaldTest> {
    let p = beta.len();
    if c.cols() != p || v.rows() != p || !v.is_square() {
        return Err(Error::DimensionMismatch(
            "contrast/variance dimensions do not match the estimate".into(),
        ));
    }
    let q = c.rows();
    if q == 0 || q > p || rank_detect(c, default_rank_tol(p)) < q {
        return Err(Error::RankDeficientContrast);
    }
    let mut cvc = c.matmul(v).matmul(&c.transpose());
    cvc.symmetrize();
    let cb = c.matvec(beta);
    let w = match SpdFactor::new(&cvc) {
        Ok(f) => dot(&cb, &f.solve_vec(&cb)),
        Err(_) => return Err(Error::RankDeficientContrast),
    };
    Ok(WaldTest {
        w,
        df: q,
        p_value: chi2_upper(w, q as f64),
    })
}

pub fn wald_coefs(beta: &[f64], v: &Matrix) -> Vec<CoefZTest> {
    beta.iter()
        .enumerate()
        .map(|(j, &est)| {
            let se = v.get(j, j).max(0.0).sqrt();
            let z = if est == 0.0 { 0.0 } else { est / se };
            CoefZTest {
                estimate: est,
                se,
                z,
                p_value: chi2_upper(z * z, 1.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
