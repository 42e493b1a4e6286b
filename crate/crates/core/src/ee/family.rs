//! Score/link specifications for the estimating-equation families.
//!
//! Every shipped family has score contribution `psi_i = x_i S_i W_i (y_i - mu_i)`
//! with `S = d mu / d eta` and weight `W` chosen so that `S W = 1`, i.e.
//! `psi_i = x_i (y_i - mu_i)`. The negative score Jacobian is then
//! `A = X' diag(S^2 W) X = X' diag(S) X`, which is also the IRLS working
//! information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overflow guard for exponential links; exp(350) is still comfortably finite
/// when squared into the working weights.
const EXP_ETA_CAP: f64 = 350.0;

/// Mean function used by the quasi-likelihood family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFn {
    /// `mu = eta` — reduces the estimating equation to least squares.
    Identity,
    /// `mu = 1/(1 + exp(-eta))`
    Logit,
    /// `mu = exp(eta)`
    Log,
}

impl LinkFn {
    fn mean(self, eta: f64) -> f64 {
        match self {
            LinkFn::Identity => eta,
            LinkFn::Logit => logistic(eta),
            LinkFn::Log => eta.min(EXP_ETA_CAP).exp(),
        }
    }

    fn mean_deriv(self, eta: f64) -> f64 {
        match self {
            LinkFn::Identity => 1.0,
            LinkFn::Logit => {
                let m = logistic(eta);
                m * (1.0 - m)
            }
            LinkFn::Log => eta.min(EXP_ETA_CAP).exp(),
        }
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Estimating-equation family: mean function, score weights and the variance
/// function behind the sandwich meat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EeFamily {
    /// Bernoulli response, logit link.
    Logistic,
    /// Count response, log link.
    Poisson,
    /// Quasi-likelihood score `psi = [y - g(x'beta)] x` with caller-chosen `g`.
    Quasi(LinkFn),
}

impl EeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            EeFamily::Logistic => "logistic",
            EeFamily::Poisson => "poisson",
            EeFamily::Quasi(_) => "quasi",
        }
    }

    /// `mu = g(eta)`
    pub fn mean(&self, eta: f64) -> f64 {
        match self {
            EeFamily::Logistic => logistic(eta),
            EeFamily::Poisson => eta.min(EXP_ETA_CAP).exp(),
            EeFamily::Quasi(link) => link.mean(eta),
        }
    }

    /// `S = d mu / d eta`
    pub fn mean_deriv(&self, eta: f64) -> f64 {
        match self {
            EeFamily::Logistic => {
                let m = logistic(eta);
                m * (1.0 - m)
            }
            EeFamily::Poisson => eta.min(EXP_ETA_CAP).exp(),
            EeFamily::Quasi(link) => link.mean_deriv(eta),
        }
    }

    /// Score weight `W`; for the shipped families `S W = 1`.
    pub fn weight(&self, eta: f64) -> f64 {
        1.0 / self.mean_deriv(eta).max(f64::MIN_POSITIVE)
    }

    /// IRLS working weight `S^2 W`.
    pub fn working_weight(&self, eta: f64) -> f64 {
        self.mean_deriv(eta)
    }

    /// Multiplier of `x (y - mu)` in the score; identically one for the
    /// shipped families but kept explicit so the score and its Jacobian stay
    /// in sync.
    pub fn psi_scale(&self, _eta: f64) -> f64 {
        1.0
    }

    /// Reject linear predictors outside the family domain.
    pub fn check_eta(&self, eta: f64) -> Result<()> {
        if !eta.is_finite() {
            return Err(Error::DomainViolation("non-finite linear predictor".into()));
        }
        match self {
            EeFamily::Poisson | EeFamily::Quasi(LinkFn::Log) if eta > EXP_ETA_CAP => Err(
                Error::DomainViolation(format!("exp link overflows at eta = {eta:.3e}")),
            ),
            _ => Ok(()),
        }
    }

    /// Whether the family models Bernoulli responses through a logit link and
    /// can therefore separate.
    pub fn can_separate(&self) -> bool {
        matches!(self, EeFamily::Logistic | EeFamily::Quasi(LinkFn::Logit))
    }

    pub fn from_name(name: &str) -> Option<EeFamily> {
        match name {
            "logistic" => Some(EeFamily::Logistic),
            "poisson" => Some(EeFamily::Poisson),
            "quasi" | "quasi_identity" => Some(EeFamily::Quasi(LinkFn::Identity)),
            "quasi_logit" => Some(EeFamily::Quasi(LinkFn::Logit)),
            "quasi_log" => Some(EeFamily::Quasi(LinkFn::Log)),
            _ => None,
        }
    }
}
