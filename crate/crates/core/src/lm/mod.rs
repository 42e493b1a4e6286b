//! Online-updated normal linear model.
//!
//! The state kept between accumulation points is `(V_k, W_k, beta_k, SSE_k,
//! N_k, S_yy_k, S_y_k)` with `V_k = sum X_l'X_l` and `W_k = sum X_l'y_l`. The
//! coefficient update is `beta_k = V_k^{-1} W_k` and the error sum of squares
//! updates as
//!
//! `SSE_k = SSE_{k-1} + y_k'y_k + beta_{k-1}'V_{k-1}beta_{k-1} - beta_k'V_k beta_k`,
//!
//! which together reproduce the full-data least squares fit exactly at every
//! accumulation point where `V_k` is invertible. Per-chunk design matrices may
//! be rank deficient; only the cumulative `V_k` ever needs to be inverted.

use serde::{Deserialize, Serialize};

use crate::dist::{f_upper, t_two_sided};
use crate::error::{Error, Result};
use crate::numkern::{
    chol_solve, default_rank_tol, dot, ginv, rank_detect, GinvKind, Matrix, SpdFactor,
};

/// Per-chunk sufficient statistics together with the subset fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkSummary {
    /// `X_k'X_k`
    pub xtx: Matrix,
    /// `X_k'y_k`
    pub xty: Vec<f64>,
    /// `y_k'y_k`
    pub yty: f64,
    /// `1'y_k`
    pub ysum: f64,
    /// Number of observations in the chunk.
    pub n: usize,
    /// Subset least squares estimate (generalized inverse when rank deficient).
    pub beta_sub: Vec<f64>,
    /// Subset residual sum of squares.
    pub sse_sub: f64,
    /// Detected rank of `X_k'X_k`.
    pub rank: usize,
}

/// Summarize one chunk with the Moore–Penrose pseudoinverse on rank-deficient designs.
pub fn summarize_chunk(x: &Matrix, y: &[f64], rank_tol: f64) -> Result<ChunkSummary> {
    summarize_chunk_with(x, y, rank_tol, GinvKind::MoorePenrose)
}

/// Summarize one chunk, choosing the generalized inverse used when the chunk
/// design is rank deficient.
pub fn summarize_chunk_with(
    x: &Matrix,
    y: &[f64],
    rank_tol: f64,
    kind: GinvKind,
) -> Result<ChunkSummary> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but response has {} entries",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InsufficientData { need: 1, have: 0 });
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("response entry".into()));
    }
    let p = x.cols();
    let xtx = x.gram();
    let xty = x.tr_matvec(y);
    let yty = dot(y, y);
    let ysum = y.iter().sum();
    let rank = rank_detect(&xtx, rank_tol);
    let beta_sub = if rank == p {
        match SpdFactor::new(&xtx) {
            Ok(f) => f.solve_vec(&xty),
            // borderline conditioning: the pseudoinverse handles it
            Err(_) => ginv(&xtx, kind, rank_tol).matvec(&xty),
        }
    } else {
        ginv(&xtx, kind, rank_tol).matvec(&xty)
    };
    let sse_sub = (yty - dot(&beta_sub, &xty)).max(0.0);
    Ok(ChunkSummary {
        xtx,
        xty,
        yty,
        ysum,
        n: x.rows(),
        beta_sub,
        sse_sub,
        rank,
    })
}

/// Ridge bookkeeping: `V_0 = lambda I` was folded into the state at
/// initialization and is still present while `active` is true.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ridge {
    pub lambda: f64,
    pub active: bool,
}

/// Outcome of one accumulation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// The cumulative design is full rank; estimates were refreshed.
    Updated,
    /// The cumulative design is still singular; summaries were accumulated and
    /// the coefficient estimate is deferred until it becomes invertible.
    Deferred,
}

/// Cumulative linear model summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmState {
    p: usize,
    v: Matrix,
    w: Vec<f64>,
    beta: Option<Vec<f64>>,
    sse: Option<f64>,
    n_total: usize,
    s_yy: f64,
    s_y: f64,
    chunks_seen: usize,
    ridge: Option<Ridge>,
}

impl LmState {
    /// Fresh state with `V_0 = 0`, `beta_0 = 0`.
    pub fn new(p: usize) -> LmState {
        LmState {
            p,
            v: Matrix::zeros(p, p),
            w: vec![0.0; p],
            beta: Some(vec![0.0; p]),
            sse: Some(0.0),
            n_total: 0,
            s_yy: 0.0,
            s_y: 0.0,
            chunks_seen: 0,
            ridge: None,
        }
    }

    /// Ridge warm start `V_0 = lambda I`, keeping early-stream estimates
    /// well defined even when the first chunks are rank deficient. The bias is
    /// removed exactly by [`LmState::debias`] once the accumulated design has
    /// full rank.
    pub fn init_ridge(p: usize, lambda: f64) -> Result<LmState> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveLambda(lambda));
        }
        let mut state = LmState::new(p);
        state.v = Matrix::scaled_identity(p, lambda);
        state.ridge = Some(Ridge {
            lambda,
            active: true,
        });
        Ok(state)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn chunks_seen(&self) -> usize {
        self.chunks_seen
    }

    pub fn s_yy(&self) -> f64 {
        self.s_yy
    }

    pub fn s_y(&self) -> f64 {
        self.s_y
    }

    /// Cumulative information matrix `V_k` (includes the ridge term while active).
    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn ridge(&self) -> Option<Ridge> {
        self.ridge
    }

    /// Coefficient estimate, `None` while deferred.
    pub fn beta(&self) -> Option<&[f64]> {
        self.beta.as_deref()
    }

    pub fn sse(&self) -> Option<f64> {
        self.sse
    }

    /// True when the cumulative design was singular and estimates are deferred.
    pub fn is_deferred(&self) -> bool {
        self.beta.is_none()
    }

    /// Residual mean square `SSE_k / (N_k - p)`.
    pub fn mse(&self) -> Result<f64> {
        let sse = self.sse.ok_or_else(|| {
            Error::SingularCumulative("estimates deferred; MSE unavailable".into())
        })?;
        if self.n_total <= self.p {
            return Err(Error::InsufficientData {
                need: self.p + 1,
                have: self.n_total,
            });
        }
        Ok(sse / (self.n_total - self.p) as f64)
    }

    fn check_dims(&self, chunk: &ChunkSummary) -> Result<()> {
        if chunk.xtx.rows() != self.p || chunk.xty.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "state has p = {}, chunk has p = {}",
                self.p,
                chunk.xtx.rows()
            )));
        }
        Ok(())
    }

    /// Fold one chunk into the state.
    ///
    /// Consumes only the previous summaries and the chunk's sufficient
    /// statistics. When the cumulative design is still singular the summaries
    /// are accumulated and the estimate is deferred (not an error): the stored
    /// `(V, W, S_yy)` recover the exact least squares fit as soon as enough
    /// data has arrived.
    pub fn update(&mut self, chunk: &ChunkSummary) -> Result<UpdateOutcome> {
        self.check_dims(chunk)?;
        let prev_quad = self.beta.as_ref().map(|b| self.v.quad_form(b));
        self.v.add_assign(&chunk.xtx);
        self.v.symmetrize();
        for (wi, xi) in self.w.iter_mut().zip(&chunk.xty) {
            *wi += xi;
        }
        self.s_yy += chunk.yty;
        self.s_y += chunk.ysum;
        self.n_total += chunk.n;
        self.chunks_seen += 1;

        match SpdFactor::new(&self.v) {
            Ok(f) => {
                let beta_new = f.solve_vec(&self.w);
                let quad_new = self.v.quad_form(&beta_new);
                let sse_new = match (self.sse, prev_quad) {
                    (Some(sse_prev), Some(quad_prev)) => {
                        sse_prev + chunk.yty + quad_prev - quad_new
                    }
                    // leaving deferred mode: telescoped form of the recursion
                    _ => self.s_yy - quad_new,
                };
                self.beta = Some(beta_new);
                self.sse = Some(sse_new.max(0.0));
                Ok(UpdateOutcome::Updated)
            }
            Err(_) => {
                self.beta = None;
                self.sse = None;
                Ok(UpdateOutcome::Deferred)
            }
        }
    }

    /// Fold chunk `kappa` in and remove the ridge bias in the same step:
    ///
    /// `beta_kappa = (V_kappa - V_0)^{-1} W_kappa`,
    /// `SSE_kappa  = SSE_{kappa-1} + y'y + beta'V_{kappa-1}beta - beta_kappa'(V_kappa - V_0)beta_kappa`.
    ///
    /// Afterwards the ridge term is gone and ordinary updates continue
    /// unbiased. Fails with `StillDeficient` (leaving the state untouched)
    /// when the accumulated data alone is still rank deficient.
    pub fn debias(&mut self, chunk: &ChunkSummary) -> Result<()> {
        self.check_dims(chunk)?;
        let ridge = match self.ridge {
            Some(r) if r.active => r,
            _ => return Err(Error::Degenerate("debias requires an active ridge term".into())),
        };
        let mut v_new = self.v.add(&chunk.xtx);
        v_new.symmetrize();
        let v_data = v_new.sub(&Matrix::scaled_identity(self.p, ridge.lambda));
        let factor = match SpdFactor::new(&v_data) {
            Ok(f) => f,
            Err(_) => return Err(Error::StillDeficient),
        };
        let mut w_new = self.w.clone();
        for (wi, xi) in w_new.iter_mut().zip(&chunk.xty) {
            *wi += xi;
        }
        let beta_new = factor.solve_vec(&w_new);
        let quad_prev = self
            .beta
            .as_ref()
            .map(|b| self.v.quad_form(b))
            .unwrap_or(0.0);
        let quad_new = v_data.quad_form(&beta_new);
        let sse_prev = self.sse.unwrap_or(0.0);
        let sse_new = (sse_prev + chunk.yty + quad_prev - quad_new).max(0.0);

        self.v = v_data;
        self.w = w_new;
        self.beta = Some(beta_new);
        self.sse = Some(sse_new);
        self.s_yy += chunk.yty;
        self.s_y += chunk.ysum;
        self.n_total += chunk.n;
        self.chunks_seen += 1;
        self.ridge = Some(Ridge {
            lambda: ridge.lambda,
            active: false,
        });
        Ok(())
    }

    fn require_estimates(&self) -> Result<(&[f64], f64)> {
        match (&self.beta, self.sse) {
            (Some(b), Some(s)) => Ok((b.as_slice(), s)),
            _ => Err(Error::SingularCumulative(
                "estimates deferred until the cumulative design has full rank".into(),
            )),
        }
    }

    /// Cholesky factor of the cumulative information matrix.
    pub fn v_factor(&self) -> Result<SpdFactor> {
        SpdFactor::new(&self.v)
            .map_err(|_| Error::SingularCumulative("V_k is not positive definite".into()))
    }

    /// Online ANOVA table for the cumulative data. Assumes the model contains
    /// an intercept column, otherwise the SSR/SST decomposition is not
    /// meaningful.
    pub fn anova(&self) -> Result<AnovaTable> {
        let (_, sse) = self.require_estimates()?;
        if self.n_total <= self.p {
            return Err(Error::InsufficientData {
                need: self.p + 1,
                have: self.n_total,
            });
        }
        let n = self.n_total as f64;
        let sst = self.s_yy - self.s_y * self.s_y / n;
        let df_err = (self.n_total - self.p) as f64;
        let mse = sse / df_err;
        let ssr = sst - sse;
        let df_reg = (self.p - 1) as f64;
        let degenerate = sst <= f64::EPSILON * self.s_yy.abs().max(1.0);
        let (msr, f, p_value) = if self.p > 1 && !degenerate && mse >= 0.0 {
            let msr = ssr / df_reg;
            let f = msr / mse;
            (Some(msr), Some(f), Some(f_upper(f, df_reg, df_err)))
        } else {
            (None, None, None)
        };
        let r_squared = if degenerate { None } else { Some(ssr / sst) };
        Ok(AnovaTable {
            df_regression: df_reg,
            ss_regression: ssr,
            ms_regression: msr,
            f_statistic: f,
            p_value,
            df_error: df_err,
            ss_error: sse,
            ms_error: mse,
            df_total: n - 1.0,
            ss_total: sst,
            r_squared,
            degenerate,
        })
    }

    /// Per-coefficient t tests with `se_j = sqrt(MSE (V_k^{-1})_jj)` against
    /// `t_{N_k - p}`.
    pub fn coef_t_tests(&self) -> Result<Vec<CoefTest>> {
        let (beta, _) = self.require_estimates()?;
        let mse = self.mse()?;
        let factor = self.v_factor()?;
        let inv = factor.inverse();
        let df = (self.n_total - self.p) as f64;
        let tests = beta
            .iter()
            .enumerate()
            .map(|(j, &est)| {
                let se = (mse * inv.get(j, j)).max(0.0).sqrt();
                let t = if est == 0.0 { 0.0 } else { est / se };
                CoefTest {
                    estimate: est,
                    se,
                    t,
                    p_value: t_two_sided(t, df),
                }
            })
            .collect();
        Ok(tests)
    }

    /// General linear hypothesis test of `C beta = 0`:
    /// `F = (beta'C'(C V^{-1} C')^{-1} C beta / q) / MSE ~ F_{q, N-p}`.
    pub fn glh_f_test(&self, c: &Matrix) -> Result<GlhTest> {
        let (beta, _) = self.require_estimates()?;
        if c.cols() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "contrast has {} columns for p = {}",
                c.cols(),
                self.p
            )));
        }
        let q = c.rows();
        if q == 0 || q > self.p || rank_detect(c, default_rank_tol(self.p)) < q {
            return Err(Error::RankDeficientContrast);
        }
        let mse = self.mse()?;
        let factor = self.v_factor()?;
        // C V^{-1} C'
        let vinv_ct = factor.solve_mat(&c.transpose());
        let mut middle = c.matmul(&vinv_ct);
        middle.symmetrize();
        let cb = c.matvec(beta);
        let quad = match chol_solve(&middle, &Matrix::from_vec(q, 1, cb.clone())?) {
            Ok(sol) => dot(&cb, sol.as_slice()),
            Err(_) => return Err(Error::RankDeficientContrast),
        };
        let df1 = q as f64;
        let df2 = (self.n_total - self.p) as f64;
        let f = (quad / df1) / mse;
        Ok(GlhTest {
            f,
            df1,
            df2,
            p_value: f_upper(f, df1, df2),
        })
    }
}

/// Online ANOVA decomposition for the cumulative data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnovaTable {
    pub df_regression: f64,
    pub ss_regression: f64,
    pub ms_regression: Option<f64>,
    pub f_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub df_error: f64,
    pub ss_error: f64,
    pub ms_error: f64,
    pub df_total: f64,
    pub ss_total: f64,
    pub r_squared: Option<f64>,
    /// Set when `SST_k` is (numerically) zero and the decomposition collapses.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefTest {
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlhTest {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}
