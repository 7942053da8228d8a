//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Coefficients do not sum to zero (no vanishing moment of order 0).
    #[error("not a filter: {0}")]
    NotAFilter(String),

    /// All discrete moments up to the filter length vanish.
    #[error("degenerate filter: all moments up to r = {0} vanish")]
    AllMomentsVanish(usize),

    /// Phi(0) vanished, so the normalized ratio is undefined.
    #[error("degenerate filter: Phi(0) = 0")]
    DegenerateFilter,

    /// Covariance matrix failed Cholesky even after jitter escalation.
    #[error("covariance matrix not positive definite (pivot {pivot} at index {index}, jitter {jitter:.3e})")]
    NotPsd {
        index: usize,
        pivot: f64,
        jitter: f64,
    },

    /// Filter lag l must be smaller than the grid size N.
    #[error("filter too long: lag {lag} >= N = {n}")]
    FilterTooLong { lag: usize, n: usize },

    /// The increment variance pi(0) is not strictly positive.
    #[error("degenerate variance: pi(0) = {0:.6e}")]
    DegenerateVariance(f64),

    /// Series parameter outside the convergence region H < p - 1/(4q).
    #[error("divergent series: H = {h} outside H < {bound} (p = {p}, q = {q})")]
    DivergentSeries {
        h: f64,
        p: usize,
        q: usize,
        bound: f64,
    },

    /// Operation requires a different H regime.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// Cost guard on the O(N^m) cumulant sums.
    #[error("too large: N = {n} exceeds the guard {max} for m = {m}")]
    TooLarge { n: usize, m: usize, max: usize },

    /// Successive quadrature refinements did not agree.
    #[error("quadrature not converged: error estimate {err:.3e} > tolerance {tol:.3e}")]
    QuadratureNotConverged { err: f64, tol: f64 },

    /// Inversion target function is not strictly decreasing on the bracket.
    #[error("not monotone: g({left}) = {g_left:.6e} <= g({right}) = {g_right:.6e}; N too small for inversion")]
    NotMonotone {
        left: f64,
        right: f64,
        g_left: f64,
        g_right: f64,
    },

    /// Empirical absolute moment is not strictly positive.
    #[error("degenerate ratio: empirical moment S = {0:.6e}")]
    DegenerateRatio(f64),

    /// No closed-form asymptotic standard error exists for this estimator.
    #[error("no closed-form asymptotic s.e. for {0}; use Monte-Carlo/bootstrap errors")]
    NoClosedFormSe(&'static str),

    /// Parameter validation failure.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
