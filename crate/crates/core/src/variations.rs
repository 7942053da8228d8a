//! Filtered increments and the k-variation statistics V_N, S_N, G_N, plus the
//! Gaussian-moment and Hermite-coefficient helpers they rely on.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::covariance::pi_alpha;
use crate::error::{Error, Result};
use crate::filters::{factorial, Filter};
use crate::sampler::FieldSlice;

/// The three statistics attached to one (slice, filter, k) triple.
///
/// V is the centered k-variation (normalized by the theoretical moment at the
/// model's true H), S the raw empirical absolute moment used by the
/// estimators, and G = sqrt(N - l) V the renormalized sequence of the CLT.
#[derive(Debug, Clone, Serialize)]
pub struct VariationResult {
    pub k: u32,
    pub filter_id: String,
    pub n: usize,
    pub v: f64,
    pub s: f64,
    pub g: f64,
}

/// Spatial increments along the filter: U(i/N) = sum_r a_r u(t, (i-r)/N),
/// for i = l..N (N - l + 1 values).
pub fn filtered_increments(slice: &FieldSlice, f: &Filter) -> Result<Vec<f64>> {
    filtered_increments_values(slice.values(), f)
}

/// Same, from a raw grid-value vector of length N + 1.
pub fn filtered_increments_values(u: &[f64], f: &Filter) -> Result<Vec<f64>> {
    let n = u.len() - 1;
    let l = f.lag();
    if l >= n {
        return Err(Error::FilterTooLong { lag: l, n });
    }
    let coeffs = f.coeffs();
    Ok((l..=n)
        .map(|i| coeffs.iter().enumerate().map(|(r, &a)| a * u[i - r]).sum())
        .collect())
}

/// k-th absolute moment of a standard Gaussian:
/// E_k = 2^{k/2} Gamma((k+1)/2) / Gamma(1/2).
pub fn gaussian_abs_moment(k: u32) -> f64 {
    2f64.powf(k as f64 / 2.0) * gamma((k as f64 + 1.0) / 2.0) / gamma(0.5)
}

/// Probabilists' Hermite polynomial H_j(x), by the explicit finite sum
/// H_j(x) = j! sum_a (-1)^a x^{j-2a} / (a! (j-2a)! 2^a).
pub fn hermite(j: u32, x: f64) -> f64 {
    let j = j as usize;
    let mut sum = 0.0;
    for a in 0..=(j / 2) {
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = factorial(j) / (factorial(a) * factorial(j - 2 * a) * 2f64.powi(a as i32));
        sum += sign * coeff * x.powi((j - 2 * a) as i32);
    }
    sum
}

/// Hermite coefficient c^k_{2j} = (1/(2j)!) prod_{i=0}^{j-1} (k - 2i) of the
/// expansion of |x|^k / E_k - 1; the odd-index coefficients vanish, and for
/// even k the product kills every index 2j > k.
pub fn hermite_coeff(k: u32, j: u32) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let mut prod = 1.0;
    for i in 0..j {
        prod *= k as f64 - 2.0 * i as f64;
    }
    prod / factorial(2 * j as usize)
}

/// Empirical absolute moment S_N(k, alpha) = (1/(N-l)) sum_{i=l}^{N-1} |U(i/N)|^k.
///
/// This is the estimator input: it never looks at the model's H.
pub fn empirical_abs_moment(slice: &FieldSlice, f: &Filter, k: u32) -> Result<f64> {
    empirical_abs_moment_values(slice.values(), f, k)
}

/// Same, from a raw grid-value vector (e.g. a slice read back from CSV).
pub fn empirical_abs_moment_values(values: &[f64], f: &Filter, k: u32) -> Result<f64> {
    let incr = filtered_increments_values(values, f)?;
    let n = values.len() - 1;
    let l = f.lag();
    // The displayed index range stops at N-1: drop the final increment.
    let s: f64 = incr[..n - l].iter().map(|u| u.abs().powi(k as i32)).sum();
    Ok(s / (n - l) as f64)
}

/// The centered k-variation V, the raw moment S, and G = sqrt(N-l) V.
///
/// V is normalized by the theoretical E|U|^k = E_k pi(0)^{k/2} evaluated at
/// the model's true H; it is the statistic of the limit theorems, not an
/// estimator input.
pub fn v_stat(slice: &FieldSlice, f: &Filter, k: u32) -> Result<VariationResult> {
    let incr = filtered_increments(slice, f)?;
    let n = slice.n();
    let l = f.lag();
    let pi0 = pi_alpha(slice.model(), f, n, 0);
    if pi0 <= 0.0 {
        return Err(Error::DegenerateVariance(pi0));
    }
    let denom = gaussian_abs_moment(k) * pi0.powf(k as f64 / 2.0);
    let mut v = 0.0;
    for u in &incr {
        v += u.abs().powi(k as i32) / denom - 1.0;
    }
    v /= (n - l) as f64;
    let s: f64 = incr[..n - l]
        .iter()
        .map(|u| u.abs().powi(k as i32))
        .sum::<f64>()
        / (n - l) as f64;
    Ok(VariationResult {
        k,
        filter_id: f.id(),
        n,
        v,
        s,
        g: ((n - l) as f64).sqrt() * v,
    })
}
