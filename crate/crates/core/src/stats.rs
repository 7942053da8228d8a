//! Shared statistical helpers: deterministic pairwise aggregation,
//! Kolmogorov-Smirnov goodness of fit against a fully specified normal null,
//! k-statistics for sample cumulants, and Freedman-Diaconis histograms.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Pairwise (cascade) summation: deterministic for a fixed input order and
/// stable to ~1e-15 relative regardless of how the work was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample variance with the n-1 divisor.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() as f64 - 1.0)
}

/// Unbiased k-statistics (k2, k3, k4) plus the mean.
pub fn sample_cumulants(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let pow_sums = |p: i32| {
        let v: Vec<f64> = xs.iter().map(|x| (x - m).powi(p)).collect();
        pairwise_sum(&v)
    };
    let m2 = pow_sums(2) / n;
    let m3 = pow_sums(3) / n;
    let m4 = pow_sums(4) / n;
    let k2 = n / (n - 1.0) * m2;
    let k3 = n * n / ((n - 1.0) * (n - 2.0)) * m3;
    let k4 =
        n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    (m, k2, k3, k4)
}

/// KS statistic and p-value against N(mu, sigma^2) with both parameters
/// fixed in advance (no estimation from the sample).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_test_normal(samples: &[f64], mu: f64, sigma: f64) -> KsTest {
    let normal = Normal::new(mu, sigma).expect("sigma > 0");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf(x);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - cdf).abs());
    }
    KsTest {
        statistic: d,
        p_value: kolmogorov_p(n.sqrt() * d),
    }
}

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 lambda^2}
/// (20 terms; adequate for sample sizes >= 500). The alternating series stops
/// converging for small lambda, where the theta-dual form of the same
/// distribution takes over.
pub fn kolmogorov_p(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi = std::f64::consts::PI;
        let mut cdf = 0.0;
        for j in 1..=20u32 {
            let a = (2 * j - 1) as f64;
            cdf += (-a * a * pi * pi / (8.0 * lambda * lambda)).exp();
        }
        cdf *= (2.0 * pi).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut p = 0.0;
    for j in 1..=20 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        p += sign * (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
    }
    (2.0 * p).clamp(0.0, 1.0)
}

/// Histogram with Freedman-Diaconis bin width on the pooled sample.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

pub fn fd_histogram(samples: &[f64]) -> Histogram {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let q = |p: f64| -> f64 {
        let idx = p * (n as f64 - 1.0);
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let frac = idx - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    let iqr = q(0.75) - q(0.25);
    let span = sorted[n - 1] - sorted[0];
    let width = if iqr > 0.0 {
        2.0 * iqr / (n as f64).cbrt()
    } else if span > 0.0 {
        span / 10.0
    } else {
        1.0
    };
    let bins = ((span / width).ceil() as usize).clamp(1, 1000);
    let width = if span > 0.0 {
        span / bins as f64
    } else {
        width
    };
    let mut counts = vec![0u64; bins];
    for &x in &sorted {
        let b = (((x - sorted[0]) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram {
        lo: sorted[0],
        width,
        counts,
    }
}
