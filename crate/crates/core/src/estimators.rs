//! The three Hurst estimators: exact inversion of pi_x(0), inversion of its
//! dominant part, and the two-filter thinning log-ratio that needs no t.

use serde::Serialize;

use crate::covariance::WaveModel;

use crate::error::{Error, Result};
use crate::filters::{c1_c2, Filter};
use crate::limits::exact_variance_chaos;
use crate::sampler::FieldSlice;
use crate::variations::{empirical_abs_moment, gaussian_abs_moment};

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact inversion of pi_x(0) (t known).
    Hat,
    /// Inversion of the dominant part c1(x) N^{-2x} (t known).
    Bar,
    /// Thinning log-ratio (t not needed).
    Tilde,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Hat => "hat",
            Method::Bar => "bar",
            Method::Tilde => "tilde",
        }
    }
}

/// Inversion bracket: the open interval (1/2, 1) shrunk by 1e-6.
const BRACKET_LO: f64 = 0.5 + 1e-6;
const BRACKET_HI: f64 = 1.0 - 1e-6;
/// Bisection stops when the bracket is shorter than this.
const BISECT_TOL: f64 = 1e-10;
/// Raw roots are chased outside (1/2, 1) down to this floor / up to this cap.
const RAW_LO: f64 = 0.05;
const RAW_HI: f64 = 1.49;

/// One estimate: the clamped headline value, the raw root, and the inputs.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub method: Method,
    /// Headline estimate, clamped into [0.5, 1.0].
    pub h_est: f64,
    /// Raw inversion value before clamping.
    pub h_raw: f64,
    /// True iff the raw root fell outside (0.5, 1.0).
    pub clamped: bool,
    pub se_asymptotic: Option<f64>,
    pub k: u32,
    pub filter_id: String,
    pub n: usize,
    pub t: Option<f64>,
}

fn finish(
    method: Method,
    raw: f64,
    k: u32,
    filter_id: String,
    n: usize,
    t: Option<f64>,
) -> EstimateResult {
    let clamped = !(0.5..=1.0).contains(&raw);
    EstimateResult {
        method,
        h_est: raw.clamp(0.5, 1.0),
        h_raw: raw,
        clamped,
        se_asymptotic: None,
        k,
        filter_id,
        n,
        t,
    }
}

/// Bisection for g(x) = target with g strictly decreasing on [lo, hi].
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Invert a strictly decreasing g over the (0.5, 1) bracket, chasing roots
/// that fall outside into [RAW_LO, RAW_HI] so the raw value can be reported.
fn invert_decreasing(g: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    let g_lo = g(BRACKET_LO);
    let g_hi = g(BRACKET_HI);
    if g_lo <= g_hi {
        return Err(Error::NotMonotone {
            left: BRACKET_LO,
            right: BRACKET_HI,
            g_left: g_lo,
            g_right: g_hi,
        });
    }
    if target > g_lo {
        // Root below 0.5: extend leftwards.
        if target >= g(RAW_LO) {
            return Ok(RAW_LO);
        }
        return Ok(bisect(&g, RAW_LO, BRACKET_LO, target));
    }
    if target < g_hi {
        // Root above 1: extend rightwards while g keeps decreasing above target.
        let mut lo = BRACKET_HI;
        let mut hi = lo;
        loop {
            let next = (hi + 0.05).min(RAW_HI);
            if g(next) > target && next < RAW_HI {
                lo = next;
                hi = next;
            } else {
                hi = next;
                break;
            }
        }
        if g(hi) > target {
            return Ok(RAW_HI);
        }
        return Ok(bisect(&g, lo, hi, target));
    }
    Ok(bisect(&g, BRACKET_LO, BRACKET_HI, target))
}

fn moment_target(s: f64, k: u32) -> Result<f64> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::DegenerateRatio(s));
    }
    Ok((s / gaussian_abs_moment(k)).powf(2.0 / k as f64))
}

/// Exact estimator from a precomputed empirical moment: solves
/// pi_x(0) = (S/E_k)^{2/k} for x by bisection.
pub fn estimate_hat_from_s(s: f64, f: &Filter, k: u32, n: usize, t: f64) -> Result<EstimateResult> {
    let target = moment_target(s, k)?;
    let g = |x: f64| pi_x0(x, t, f, n);
    let raw = invert_decreasing(g, target)?;
    let mut est = finish(Method::Hat, raw, k, f.id(), n, Some(t));
    est.se_asymptotic = asymptotic_se(Method::Hat, est.h_est, t, f, k, n).ok();
    Ok(est)
}

/// Dominant-part estimator from a precomputed empirical moment: solves
/// c1(x) N^{-2x} = (S/E_k)^{2/k}.
pub fn estimate_bar_from_s(s: f64, f: &Filter, k: u32, n: usize, t: f64) -> Result<EstimateResult> {
    let target = moment_target(s, k)?;
    let g = |x: f64| c1_c2(x, t, f).0 * (n as f64).powf(-2.0 * x);
    let raw = invert_decreasing(g, target)?;
    let mut est = finish(Method::Bar, raw, k, f.id(), n, Some(t));
    est.se_asymptotic = asymptotic_se(Method::Bar, est.h_est, t, f, k, n).ok();
    Ok(est)
}

/// Thinning estimator from the two moments: (1/k) log2(S_thin / S).
pub fn estimate_tilde_from_s(
    s_base: f64,
    s_thin: f64,
    f: &Filter,
    k: u32,
    n: usize,
) -> Result<EstimateResult> {
    if s_base.is_nan() || s_base <= 0.0 {
        return Err(Error::DegenerateRatio(s_base));
    }
    if s_thin.is_nan() || s_thin <= 0.0 {
        return Err(Error::DegenerateRatio(s_thin));
    }
    let raw = (s_thin / s_base).log2() / k as f64;
    Ok(finish(Method::Tilde, raw, k, f.id(), n, None))
}

/// Exact estimator on a slice with known t.
pub fn estimate_hat(slice: &FieldSlice, f: &Filter, k: u32, t: f64) -> Result<EstimateResult> {
    let s = empirical_abs_moment(slice, f, k)?;
    estimate_hat_from_s(s, f, k, slice.n(), t)
}

/// Dominant-part estimator on a slice with known t.
pub fn estimate_bar(slice: &FieldSlice, f: &Filter, k: u32, t: f64) -> Result<EstimateResult> {
    let s = empirical_abs_moment(slice, f, k)?;
    estimate_bar_from_s(s, f, k, slice.n(), t)
}

/// Thinning estimator on a slice; t never enters.
pub fn estimate_tilde(slice: &FieldSlice, f: &Filter, k: u32) -> Result<EstimateResult> {
    let s_base = empirical_abs_moment(slice, f, k)?;
    let s_thin = empirical_abs_moment(slice, &f.thin(), k)?;
    estimate_tilde_from_s(s_base, s_thin, f, k, slice.n())
}

/// pi_x(0) = c1(x) N^{-2x} + c2(x) N^{-2x-1}, identical to pi_alpha at lag 0
/// but defined for any exponent x so raw roots outside (1/2, 1) can be chased.
fn pi_x0(x: f64, t: f64, f: &Filter, n: usize) -> f64 {
    let (c1, c2) = c1_c2(x, t, f);
    let nf = n as f64;
    c1 * nf.powf(-2.0 * x) + c2 * nf.powf(-2.0 * x - 1.0)
}

/// Plug-in asymptotic standard error sqrt(v_N^{(k)} at H_est) / (k ln N),
/// from the normal limit k ln(N) / sqrt(v_N) (H - H_hat) -> N(0, 1).
/// Valid for the hat/bar estimators in the regime H_est < p - 1/4.
pub fn asymptotic_se(
    method: Method,
    h_est: f64,
    t: f64,
    f: &Filter,
    k: u32,
    n: usize,
) -> Result<f64> {
    if method == Method::Tilde {
        return Err(Error::NoClosedFormSe("tilde"));
    }
    let p = f.order() as f64;
    if h_est >= p - 0.25 {
        return Err(Error::OutOfRegime(format!(
            "asymptotic normality needs H < p - 1/4 = {}, got H_est = {h_est}",
            p - 0.25
        )));
    }
    let model = WaveModel::new(h_est.clamp(0.5 + 1e-9, 1.0 - 1e-9), t)?;
    let mut v_n = 0.0;
    for q in 1..=(k / 2).max(1) {
        v_n += exact_variance_chaos(&model, f, n, k, q)? / (n - f.lag()) as f64;
    }
    Ok(v_n.sqrt() / (k as f64 * (n as f64).ln()))
}
