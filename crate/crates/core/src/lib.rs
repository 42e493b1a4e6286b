//! Streaming statistical inference over chunked data.
//!
//! The engine ingests data one chunk at a time and keeps only low-dimensional
//! summaries between accumulation points:
//!
//! * [`lm`] — exact online-updated least squares with ANOVA, t tests and
//!   general linear hypothesis F tests; optional ridge warm start for
//!   rank-deficient stream heads, with exact de-biasing once the cumulative
//!   design reaches full rank.
//! * [`diag`] — predictive-residual outlier diagnostics against the state of
//!   the previous accumulation point: per-observation t tests with
//!   Benjamini–Hochberg adjustment, an exact F test under normal errors, and
//!   an asymptotic F test that drops the normality assumption.
//! * [`ee`] — online-updated estimating equations for GLM-type score
//!   functions: per-chunk IRLS with generalized-inverse fallback, CEE and CUEE
//!   cumulative estimators with sandwich variances, and Wald tests.
//! * [`sim`] — data generators and study runners that reproduce the reference
//!   simulation designs at desk scale.
//! * [`numkern`] — the dense numeric kernel everything above sits on.

pub mod dist;
pub mod error;
pub mod numkern;

pub mod diag;
pub mod ee;
pub mod lm;
pub mod sim;

pub use error::{Error, Result};
pub use numkern::{GinvKind, Matrix};
