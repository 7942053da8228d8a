//! The exact spatial law of the solution slice u(t, .): pointwise covariance,
//! grid covariance matrices with Cholesky factorization, and the filtered
//! increment covariances pi and rho.

use crate::error::{Error, Result};
use crate::filters::{phi_alpha_same, Filter};

/// The pair (H, t) defining the spatial Gaussian law of u(t, .).
///
/// H is the Hurst index of the driving noise, restricted to (1/2, 1);
/// t is the fixed observation time. Operations that rely on the simplified
/// one-regime covariance additionally require t > 1 and enforce it themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveModel {
    h: f64,
    t: f64,
}

impl WaveModel {
    pub fn new(h: f64, t: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(Error::InvalidParameter(format!("H = {h} outside (1/2, 1)")));
        }
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidParameter(format!("t = {t} must be > 0")));
        }
        Ok(WaveModel { h, t })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// c_H = (4H - 1) / (4(2H + 1)).
    pub fn c_h(&self) -> f64 {
        (4.0 * self.h - 1.0) / (4.0 * (2.0 * self.h + 1.0))
    }

    /// k1 = -t/4, the N^{-2H} coefficient in pi.
    pub fn k1(&self) -> f64 {
        -self.t / 4.0
    }

    /// k2 = c_H/2, the N^{-2H-1} coefficient in pi.
    pub fn k2(&self) -> f64 {
        self.c_h() / 2.0
    }

    fn require_t_gt_1(&self) -> Result<()> {
        if self.t <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "t = {} must exceed 1 for the one-regime covariance on [0,1]",
                self.t
            )));
        }
        Ok(())
    }
}

/// Spatial covariance E[u(t,x) u(t,y)].
///
/// Two-regime closed form in d = |y - x|: for d < t,
/// (1/2)(c_H d^{2H+1} - t d^{2H}/2 + t^{2H+1}/(2H+1)); for t <= d < 2t,
/// (2t - d)^{2H+1} / (8(2H+1)); zero beyond 2t.
pub fn cov(model: &WaveModel, x: f64, y: f64) -> f64 {
    let d = (y - x).abs();
    let h = model.h;
    let t = model.t;
    let two_h = 2.0 * h;
    if d < t {
        0.5 * (model.c_h() * d.powf(two_h + 1.0) - t * d.powf(two_h) / 2.0
            + t.powf(two_h + 1.0) / (two_h + 1.0))
    } else if d < 2.0 * t {
        (2.0 * t - d).powf(two_h + 1.0) / (8.0 * (two_h + 1.0))
    } else {
        0.0
    }
}

/// Covariance of the grid (u(t, i/N))_{i=0..N}, stored as its first row
/// (the matrix is symmetric Toeplitz by spatial stationarity).
#[derive(Debug, Clone)]
pub struct CovMatrix {
    n: usize,
    first_row: Vec<f64>,
}

/// Assemble the covariance matrix on x_i = i/N. Requires t > 1 so the whole
/// grid sits in the first covariance regime.
pub fn cov_matrix(model: &WaveModel, n: usize) -> Result<CovMatrix> {
    if n < 1 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    model.require_t_gt_1()?;
    let first_row = (0..=n)
        .map(|j| cov(model, 0.0, j as f64 / n as f64))
        .collect();
    Ok(CovMatrix { n, first_row })
}

impl CovMatrix {
    /// Grid size N; the matrix is (N+1) x (N+1).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// Entry M_{ij} = cov(i/N, j/N), looked up by |i - j|.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.first_row[i.abs_diff(j)]
    }

    /// Dense lower-triangular Cholesky factor with the jitter escalation
    /// policy: plain attempt first, then diagonal shifts
    /// eps * trace/(N+1) for eps = 1e-12, 1e-11, ..., 1e-8.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let dim = self.dim();
        let trace_mean = self.first_row[0]; // constant diagonal
        let mut last_err = Error::NotPsd {
            index: 0,
            pivot: f64::NAN,
            jitter: 0.0,
        };
        for eps in [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8] {
            let jitter = eps * trace_mean;
            match chol_lower(dim, |i, j| {
                self.entry(i, j) + if i == j { jitter } else { 0.0 }
            }) {
                Ok(lower) => return Ok(CholeskyFactor { dim, lower, jitter }),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }
}

/// Packed lower-triangular Cholesky factor (row-major, row i holds i+1 entries).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagonal jitter that was needed (0.0 for a clean factorization).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// y = L z.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                row.iter().zip(z).map(|(&lij, &zj)| lij * zj).sum()
            })
            .collect()
    }
}

fn chol_lower(dim: usize, a: impl Fn(usize, usize) -> f64) -> Result<Vec<f64>> {
    let mut l = vec![0.0f64; dim * (dim + 1) / 2];
    let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a(i, j);
            for k in 0..j {
                s -= l[idx(i, k)] * l[idx(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::NotPsd {
                        index: i,
                        pivot: s,
                        jitter: 0.0,
                    });
                }
                l[idx(i, j)] = s.sqrt();
            } else {
                l[idx(i, j)] = s / l[idx(j, j)];
            }
        }
    }
    Ok(l)
}

/// Covariance of filtered increments at lag j >= 0:
/// pi^{alpha,N}_H(j) = k1 N^{-2H} Phi_{H,alpha}(j) + k2 N^{-2H-1} Phi_{H+1/2,alpha}(j).
pub fn pi_alpha(model: &WaveModel, f: &Filter, n: usize, j: i64) -> f64 {
    let h = model.h;
    let nf = n as f64;
    model.k1() * nf.powf(-2.0 * h) * phi_alpha_same(h, j, f)
        + model.k2() * nf.powf(-2.0 * h - 1.0) * phi_alpha_same(h + 0.5, j, f)
}

/// Correlation of filtered increments: rho(v) = pi(|v|) / pi(0).
pub fn rho_alpha(model: &WaveModel, f: &Filter, n: usize, v: i64) -> Result<f64> {
    let pi0 = pi_alpha(model, f, n, 0);
    if pi0 <= 0.0 {
        return Err(Error::DegenerateVariance(pi0));
    }
    Ok(pi_alpha(model, f, n, v.abs()) / pi0)
}
