//! Discrete filters and the combinatorial sums Phi/phi built from them.
//!
//! A filter of order p annihilates polynomials of degree < p; the moment sums
//! Phi_{H,alpha}(j) drive every covariance, variance constant and estimator in
//! this crate.

use crate::error::{Error, Result};

/// Relative tolerance for deciding that a discrete moment vanishes.
const MOMENT_TOL: f64 = 1e-12;

/// A validated filter: coefficient vector together with its vanishing-moment
/// order `p` (smallest p >= 1 with sum a_q q^r = 0 for all r < p and != 0 at p,
/// convention 0^0 = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    coeffs: Vec<f64>,
    order: usize,
}

impl Filter {
    /// Validate a coefficient vector and determine its order.
    pub fn new(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::NotAFilter("empty coefficient vector".into()));
        }
        let l = coeffs.len() - 1;
        // Moments r = 0..=l+1; a filter of length l+1 has order at most l.
        for r in 0..=(l + 1) {
            let mut moment = 0.0;
            let mut scale: f64 = 0.0;
            for (q, &a) in coeffs.iter().enumerate() {
                let qr = int_pow(q as f64, r);
                moment += a * qr;
                scale = scale.max((a * qr).abs());
            }
            if moment.abs() > MOMENT_TOL * scale.max(1e-300) {
                if r == 0 {
                    return Err(Error::NotAFilter(format!(
                        "coefficients sum to {moment:.6e}"
                    )));
                }
                return Ok(Filter {
                    coeffs: coeffs.to_vec(),
                    order: r,
                });
            }
        }
        Err(Error::AllMomentsVanish(coeffs.len()))
    }

    /// Parse a comma-separated decimal string, e.g. `"1,-2,1"`, or a JSON
    /// array form `"[1,-2,1]"` as used in config files.
    pub fn parse(s: &str) -> Result<Self> {
        let body = s.trim();
        let body = body
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .unwrap_or(body);
        let coeffs: std::result::Result<Vec<f64>, _> = body
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect();
        match coeffs {
            Ok(c) => Filter::new(&c),
            Err(e) => Err(Error::InvalidParameter(format!(
                "cannot parse filter {s:?}: {e}"
            ))),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Filter length l + 1.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Maximum lag l.
    pub fn lag(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Vanishing-moment order p.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Insert a zero between consecutive coefficients: a2_{2k} = a_k,
    /// a2_{odd} = 0. Doubles the lag scale and preserves the order.
    pub fn thin(&self) -> Filter {
        let mut out = vec![0.0; 2 * self.lag() + 1];
        for (k, &a) in self.coeffs.iter().enumerate() {
            out[2 * k] = a;
        }
        Filter {
            coeffs: out,
            order: self.order,
        }
    }

    /// Compact id used in reports, e.g. `"1,-2,1"`.
    pub fn id(&self) -> String {
        self.coeffs
            .iter()
            .map(|a| {
                if a.fract() == 0.0 {
                    format!("{}", *a as i64)
                } else {
                    format!("{a}")
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Integer power with the 0^0 = 1 convention.
fn int_pow(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        1.0
    } else {
        base.powi(exp as i32)
    }
}

/// Cross-filter moment sum
/// Phi_{H,(f1,f2)}(j) = sum_{q,r} f1_q f2_r |j + q - r|^{2H}.
///
/// `h` is the exponent parameter: callers evaluate at both H and H + 1/2.
///
/// Small lags use the literal double loop. At large lags the loop subtracts
/// terms of size j^{2H} to produce a result of size j^{2H-2p} and loses
/// 2p log10(j) digits, so beyond `PHI_DIRECT_MAX` the sum is evaluated through
/// its Taylor-remainder integral form, which is cancellation-free.
pub fn phi_alpha(h: f64, j: i64, f1: &Filter, f2: &Filter) -> f64 {
    if j < 0 {
        // Phi^{(f1,f2)}(-j) = Phi^{(f2,f1)}(j).
        return phi_alpha(h, -j, f2, f1);
    }
    let switch = (f1.lag() + f2.lag() + 1).max(PHI_DIRECT_MAX) as i64;
    if j <= switch {
        phi_direct(h, j, f1, f2)
    } else {
        phi_remainder_form(h, j, f1, f2)
    }
}

const PHI_DIRECT_MAX: usize = 16;

fn phi_direct(h: f64, j: i64, f1: &Filter, f2: &Filter) -> f64 {
    let two_h = 2.0 * h;
    let mut sum = 0.0;
    for (q, &aq) in f1.coeffs.iter().enumerate() {
        for (r, &ar) in f2.coeffs.iter().enumerate() {
            let arg = (j + q as i64 - r as i64).abs() as f64;
            if arg != 0.0 {
                sum += aq * ar * arg.powf(two_h);
            }
        }
    }
    sum
}

/// Gauss-Legendre nodes shared by every remainder-form evaluation.
fn phi_gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| crate::quad::gauss_legendre(24))
}

/// Phi via the integral remainder of the Taylor expansion of x^{2H} at lag j.
///
/// With b_d = sum_{q-r=d} f1_q f2_r and P = order(f1) + order(f2), the moments
/// sum_d b_d d^m vanish for m < P, leaving only the order-P remainder:
/// Phi(j) = [c_P/(P-1)!] sum_d b_d int_0^d (d-s)^{P-1} (j+s)^{2H-P} ds,
/// c_P = prod_{i<P}(2H-i). Every integrand value has the size of the final
/// result, so no digits cancel. Requires j > lag(f2).
fn phi_remainder_form(h: f64, j: i64, f1: &Filter, f2: &Filter) -> f64 {
    let l1 = f1.lag() as i64;
    let l2 = f2.lag() as i64;
    debug_assert!(j > l2);
    let p_total = f1.order + f2.order;
    let mut c = 1.0;
    for i in 0..p_total {
        c *= 2.0 * h - i as f64;
    }
    c /= factorial(p_total - 1);
    let (xs, ws) = phi_gl_rule();
    let exponent = 2.0 * h - p_total as f64;
    let mut sum = 0.0;
    for d in -l2..=l1 {
        if d == 0 {
            continue;
        }
        let mut b = 0.0;
        for (q, &aq) in f1.coeffs.iter().enumerate() {
            let r = q as i64 - d;
            if (0..=l2).contains(&r) {
                b += aq * f2.coeffs[r as usize];
            }
        }
        if b == 0.0 {
            continue;
        }
        let df = d as f64;
        // int_0^d (d-s)^{P-1} (j+s)^{2H-P} ds, signed.
        let half = 0.5 * df;
        let mut integral = 0.0;
        for (&x, &w) in xs.iter().zip(ws) {
            let s = half + half * x;
            integral += w * (df - s).powi(p_total as i32 - 1) * (j as f64 + s).powf(exponent);
        }
        sum += b * integral * half;
    }
    c * sum
}

/// Same-filter convenience for `phi_alpha`.
pub fn phi_alpha_same(h: f64, j: i64, f: &Filter) -> f64 {
    phi_alpha(h, j, f, f)
}

/// Normalized ratio phi_{H,alpha}(v) = Phi(v) / Phi(0).
pub fn phi_ratio(h: f64, v: i64, f: &Filter) -> Result<f64> {
    let phi0 = phi_alpha_same(h, 0, f);
    if phi0 == 0.0 {
        return Err(Error::DegenerateFilter);
    }
    Ok(phi_alpha_same(h, v, f) / phi0)
}

/// Asymptotic constant kappa_H with
/// Phi_{H,(f1,f2)}(k) ~ kappa_H k^{2H-2p} as k -> infinity,
/// kappa_H = [2H(2H-1)...(2H-2p+1)/(2p)!] sum_{q,r} f1_q f2_r (q-r)^{2p},
/// p = min(order f1, order f2).
pub fn kappa_asymptotic(h: f64, f1: &Filter, f2: &Filter) -> f64 {
    let p = f1.order.min(f2.order);
    let mut factor = 1.0;
    for i in 0..(2 * p) {
        factor *= 2.0 * h - i as f64;
    }
    factor /= factorial(2 * p);
    let mut sum = 0.0;
    for (q, &aq) in f1.coeffs.iter().enumerate() {
        for (r, &ar) in f2.coeffs.iter().enumerate() {
            sum += aq * ar * int_pow(q as f64 - r as f64, 2 * p);
        }
    }
    factor * sum
}

/// The pair (c1, c2):
/// c1 = -(t/4) sum a_q a_r |q-r|^{2H},
/// c2 = (c_H/2) sum a_q a_r |q-r|^{2H+1}, c_H = (4H-1)/(4(2H+1)),
/// so that pi(0) = c1 N^{-2H} + c2 N^{-2H-1}.
///
/// A t-free normalization of the same moment sum, -(1/2) sum a_q a_r
/// |q-r|^{2H}, floats around in the literature; it equals (2/t) * c1. Only
/// the convention above is exposed.
pub fn c1_c2(h: f64, t: f64, f: &Filter) -> (f64, f64) {
    let c_h = (4.0 * h - 1.0) / (4.0 * (2.0 * h + 1.0));
    let c1 = -(t / 4.0) * phi_alpha_same(h, 0, f);
    let c2 = (c_h / 2.0) * phi_alpha_same(h + 0.5, 0, f);
    (c1, c2)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
