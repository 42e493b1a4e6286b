//! Model configuration file format.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use streamstat_core::ee::{EeFamily, IrlsConfig, VarianceKind};
use streamstat_core::GinvKind;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lm,
    Cee,
    Cuee,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Formula {
    pub response: String,
    pub covariates: Vec<String>,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub t_test: bool,
    #[serde(default = "default_fdr_alpha")]
    pub fdr_alpha: f64,
    #[serde(default)]
    pub normal_f: bool,
    #[serde(default)]
    pub asymptotic_f: bool,
    #[serde(default = "default_m")]
    pub m: usize,
}

fn default_fdr_alpha() -> f64 {
    0.05
}

fn default_m() -> usize {
    2
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            t_test: false,
            fdr_alpha: default_fdr_alpha(),
            normal_f: false,
            asymptotic_f: false,
            m: default_m(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrlsSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub warm_start: bool,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    50
}

impl Default for IrlsSettings {
    fn default() -> Self {
        IrlsSettings {
            tol: default_tol(),
            max_iter: default_max_iter(),
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub family: Option<String>,
    pub formula: Formula,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    #[serde(default)]
    pub ridge_lambda: Option<f64>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub ginv: GinvKind,
    #[serde(default)]
    pub irls: IrlsSettings,
    /// Variance estimator for the EE estimators; defaults per family
    /// (robust for poisson/quasi, model-based for logistic).
    #[serde(default)]
    pub variance: Option<VarianceKind>,
}

fn default_chunk_size() -> usize {
    10_000
}

impl ModelConfig {
    pub fn from_path(path: &std::path::Path) -> Result<ModelConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::other(format!("cannot read model config {path:?}: {e}")))?;
        let cfg: ModelConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::other(format!("invalid model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.chunk_size < 1 {
            return Err(CliError::other("chunk_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.diagnostics.fdr_alpha) || self.diagnostics.fdr_alpha <= 0.0 {
            return Err(CliError::other("fdr_alpha must lie strictly inside (0, 1)"));
        }
        if self.formula.covariates.is_empty() && !self.formula.intercept {
            return Err(CliError::other("the formula selects no columns"));
        }
        if let Some(lambda) = self.ridge_lambda {
            if lambda <= 0.0 {
                return Err(CliError::other("ridge_lambda must be positive"));
            }
        }
        match self.kind {
            ModelKind::Lm => {}
            ModelKind::Cee | ModelKind::Cuee => {
                self.resolve_family()?;
            }
        }
        Ok(())
    }

    pub fn resolve_family(&self) -> Result<EeFamily, CliError> {
        let name = self
            .family
            .as_deref()
            .ok_or_else(|| CliError::other("estimating-equation models need a family"))?;
        EeFamily::from_name(name)
            .ok_or_else(|| CliError::other(format!("unknown family `{name}`")))
    }

    pub fn irls_config(&self, family: &EeFamily) -> IrlsConfig {
        IrlsConfig {
            tol: self.irls.tol,
            max_iter: self.irls.max_iter,
            ginv: self.ginv,
            rank_tol: None,
            warm_start: self.irls.warm_start,
            variance: self
                .variance
                .unwrap_or_else(|| VarianceKind::default_for(family)),
        }
    }

    /// Number of model columns (response excluded, intercept included).
    pub fn p(&self) -> usize {
        self.formula.covariates.len() + usize::from(self.formula.intercept)
    }

    /// Stable hash of the configuration for snapshot compatibility checks.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        format!("{digest:x}")
    }

    /// Column layout identity: resuming is only legal against identical input
    /// schemas.
    pub fn schema_fingerprint(&self) -> String {
        format!(
            "{}|{}|intercept={}",
            self.formula.response,
            self.formula.covariates.join(","),
            self.formula.intercept
        )
    }
}
