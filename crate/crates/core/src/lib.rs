//! Exact simulation and Hurst-parameter inference for the spatial slice of
//! the wave equation driven by fractional-white noise.
//!
//! The crate covers the full pipeline:
//! - [`filters`]: validated difference filters and the moment sums behind
//!   every covariance and limit constant;
//! - [`covariance`]: the closed-form spatial covariance of the solution, grid
//!   matrices and increment covariances;
//! - [`sampler`]: exact (Cholesky) Gaussian sampling with reproducible,
//!   counter-derived seeding;
//! - [`variations`]: filtered increments and the k-variation statistics;
//! - [`limits`]: asymptotic variances, the multivariate limit matrix, exact
//!   finite-N variances, and the non-central cumulants;
//! - [`estimators`]: the three Hurst estimators and their asymptotic errors;
//! - [`experiments`]: Monte-Carlo benchmarking and distributional
//!   diagnostics.

pub mod covariance;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod filters;
pub mod limits;
mod quad;
pub mod sampler;
pub mod stats;
pub mod variations;

pub use covariance::{cov, cov_matrix, pi_alpha, rho_alpha, WaveModel};
pub use error::{Error, Result};
pub use estimators::{
    asymptotic_se, estimate_bar, estimate_hat, estimate_tilde, EstimateResult, Method,
};
pub use experiments::{
    clt_diagnostic, noncentral_diagnostic, run_mc, table1_preset, CellSpec, ExperimentConfig,
    ExperimentReport,
};
pub use filters::{c1_c2, kappa_asymptotic, phi_alpha, phi_ratio, Filter};
pub use limits::{
    c_qq, cumulant_finite_n, cumulant_limit, exact_variance_chaos, exact_vn, k0_constant,
    limit_constants, sigma2q, sigma_total, theta_matrix, vn_noncentral_check, LimitConstants,
};
pub use sampler::{mix_seed, sample_batch, sample_slice, FieldSlice};
pub use variations::{
    empirical_abs_moment, empirical_abs_moment_values, filtered_increments,
    filtered_increments_values, gaussian_abs_moment, hermite, hermite_coeff, v_stat,
    VariationResult,
};
