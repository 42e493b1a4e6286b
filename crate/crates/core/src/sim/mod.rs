//! Data generators and desk-scale simulation studies.

mod generate;
mod runners;

pub use generate::{
    gen_design, gen_outlier_stream, gen_response, gen_skew_t, replicate_rng, skew_t_raw_moments,
    validate_covariate_moments, CovariateKind, EeSimConfig, ErrorKind, OutlierChunk,
    OutlierSimConfig, SkewT,
};
pub use runners::{
    run_fpfn_study, run_ginv_invariance, run_poisson_bias, run_power_study, run_rmse_vs_k,
    studentized_outlier_flags, FpFnStudyConfig, GinvInvarianceConfig, GinvInvarianceSummary,
    PoissonBiasConfig, PowerStudyConfig, RmseVsKConfig, Table,
};
