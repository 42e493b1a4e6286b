//! Dense small-dimension numeric kernel: factorizations, pseudoinverses and
//! rank detection. Nothing outside this module touches raw matrix algorithms.

mod factor;
mod matrix;

pub use factor::{
    chol_solve, default_rank_tol, ginv, ginv_rao, pinv_svd, rank_detect, GinvKind, SpdFactor,
    SvdFactor,
};
pub use matrix::{axpy, dot, syr, Matrix};
