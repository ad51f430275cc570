//! Closed-form in-sample prediction risk of the flow when the truth is known.

use gfreml_core::SpectralOperator;
use ndarray::{Array1, ArrayView1};

use crate::error::Result;

/// `E(t) = n^{-1} sum_k [b_k^2 exp(-2 t lambda_k) + sigma^2 (1 - exp(-t lambda_k))^2] + sigma^2`
/// with `b = V^T (f*(X) - f0(X))`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRisk {
    pub b_coeffs: Array1<f64>,
    pub sigma2: f64,
    pub lambdas: Array1<f64>,
}

impl OracleRisk {
    pub fn new(
        op: &SpectralOperator<f64>,
        f_star_train: ArrayView1<f64>,
        f0_train: ArrayView1<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let b = op.project((&f_star_train - &f0_train).view())?;
        Ok(Self {
            b_coeffs: b,
            sigma2,
            lambdas: op.eigenvalues().to_owned(),
        })
    }

    pub fn risk(&self, t: f64) -> f64 {
        let n = self.lambdas.len() as f64;
        let s: f64 = self
            .b_coeffs
            .iter()
            .zip(&self.lambdas)
            .map(|(&b, &l)| {
                let decay = (-t * l).exp();
                let fit = -(-t * l).exp_m1();
                b * b * decay * decay + self.sigma2 * fit * fit
            })
            .sum();
        s / n + self.sigma2
    }

    /// Smallest risk over `grid`, as `(t, risk)`.
    pub fn minimize_on_grid(&self, grid: &[f64]) -> (f64, f64) {
        grid.iter()
            .map(|&t| (t, self.risk(t)))
            .fold((f64::NAN, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    /// `t = 0` followed by `points` log-spaced times over `[1e-6, 1e6] / mean(lambda)`.
    pub fn default_grid(&self, points: usize) -> Vec<f64> {
        let lbar = self.lambdas.mean().unwrap_or(1.0).max(f64::MIN_POSITIVE);
        let mut grid = vec![0.0];
        grid.extend(log_grid(1e-6 / lbar, 1e6 / lbar, points));
        grid
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}
