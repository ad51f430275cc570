//! REML-guided stopping time.
//!
//! With eigen-coefficients `c` and eigenvalues `lambda` of the training operator,
//! the profiled objective is `Q(t) = n log(sum c_k^2 exp(-t lambda_k)) + t sum lambda_k`.
//! `Q` is convex in `t`; its root in `(0, inf)` is the stopping time.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectral::check_time;
use crate::Real;

pub const DEFAULT_REL_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;
const DEGENERATE_SPREAD: f64 = 1e-12;
const BRACKET_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemlStatus {
    InteriorRoot,
    BoundaryZero,
    /// All eigenvalues equal: `Q` is constant and every `t` is a minimizer.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemlFit<T> {
    pub t_hat: T,
    pub sigma2_hat: T,
    pub edf: T,
    pub q_value: T,
    /// `Q'(0) < 0`.
    pub condition_i: bool,
    /// Eigenvalues not all equal.
    pub condition_ii: bool,
    pub psi_at_t_hat: T,
    pub q_prime_at_t_hat: T,
    pub iterations: usize,
    pub status: RemlStatus,
}

/// Log-weights `ln c_k^2 - t lambda_k`; zero coefficients carry `-inf`.
fn log_weights<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<Vec<T>> {
    check_len("eigenvalues", c.len(), lambdas.len())?;
    if c.iter().all(|&v| v == T::zero()) {
        return Err(Error::AllCoefficientsZero);
    }
    Ok(c.iter()
        .zip(lambdas)
        .map(|(&ck, &l)| (ck * ck).ln() - t * l)
        .collect())
}

/// Normalized softmax weights `p_k(t)` and the log of their normalizer.
fn softmax<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<(Vec<T>, T)> {
    let lw = log_weights(c, lambdas, t)?;
    let m = lw.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut p: Vec<T> = lw.iter().map(|&w| (w - m).exp()).collect();
    let s: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok((p, m + s.ln()))
}

fn lambda_sum<T: Real>(lambdas: ArrayView1<T>) -> T {
    lambdas.iter().copied().sum()
}

pub fn q_objective<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<T> {
    check_time(t)?;
    let (_, log_s0) = softmax(c, lambdas, t)?;
    let n = T::from_usize_lossy(c.len());
    Ok(n * log_s0 + t * lambda_sum(lambdas))
}

/// `(Q'(t), Q''(t))`. `Q''` is `n` times the variance of `lambda` under `p(t)`.
pub fn q_derivatives<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<(T, T)> {
    check_time(t)?;
    let (p, _) = softmax(c, lambdas, t)?;
    let n = T::from_usize_lossy(c.len());
    let mu: T = p.iter().zip(lambdas).map(|(&pk, &l)| pk * l).sum();
    let var: T = p
        .iter()
        .zip(lambdas)
        .map(|(&pk, &l)| pk * (l - mu) * (l - mu))
        .sum();
    Ok((lambda_sum(lambdas) - n * mu, n * var))
}

/// Empirical covariance between `lambda_k` and the spectral losses `c_k^2 exp(-t lambda_k)`.
pub fn psi<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<T> {
    check_time(t)?;
    check_len("eigenvalues", c.len(), lambdas.len())?;
    let n = T::from_usize_lossy(c.len());
    let lbar = lambda_sum(lambdas) / n;
    let j: Vec<T> = c
        .iter()
        .zip(lambdas)
        .map(|(&ck, &l)| ck * ck * (-t * l).exp())
        .collect();
    let jbar = j.iter().copied().sum::<T>() / n;
    let cov: T = lambdas
        .iter()
        .zip(&j)
        .map(|(&l, &jk)| (l - lbar) * (jk - jbar))
        .sum();
    Ok(cov / n)
}

/// `sum_k (1 - exp(-t lambda_k))`.
pub fn edf<T: Real>(lambdas: ArrayView1<T>, t: T) -> Result<T> {
    check_time(t)?;
    Ok(lambdas.iter().map(|&l| -(-t * l).exp_m1()).sum())
}

pub fn esc_curve<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t_grid: &[T]) -> Result<Array1<T>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be sorted ascending".into()));
    }
    t_grid.iter().map(|&t| psi(c, lambdas, t)).collect()
}

/// `V(t) = (n^{-1} sum c_k^2 exp(-t lambda_k)) exp(t mean(lambda))`, the
/// penalized weighted training error; equals `n^{-1} exp(Q(t) / n)`.
pub fn v_criterion<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<T> {
    let n = T::from_usize_lossy(c.len());
    Ok((q_objective(c, lambdas, t)? / n - n.ln()).exp())
}

/// `n^{-1} sum c_k^2 exp(-t lambda_k)`.
pub fn profiled_sigma2<T: Real>(c: ArrayView1<T>, lambdas: ArrayView1<T>, t: T) -> Result<T> {
    check_time(t)?;
    check_len("eigenvalues", c.len(), lambdas.len())?;
    let s: T = c
        .iter()
        .zip(lambdas)
        .map(|(&ck, &l)| ck * ck * (-t * l).exp())
        .sum();
    Ok(s / T::from_usize_lossy(c.len()))
}

/// Minimizes `Q` over `t >= 0`.
///
/// Brackets the root of `Q'` by doubling from `1/mean(lambda)`, then runs
/// Newton steps clipped to the bracket with bisection as fallback. Stops when
/// `|Q'| / mean(lambda) <= rel_tol` or the step falls below `rel_tol * t`.
pub fn solve_stopping_time<T: Real>(
    c: ArrayView1<T>,
    lambdas: ArrayView1<T>,
    rel_tol: T,
) -> Result<RemlFit<T>> {
    check_len("eigenvalues", c.len(), lambdas.len())?;
    if c.is_empty() {
        return Err(Error::TooFewSamples { n: 0, min: 1 });
    }
    if !(rel_tol > T::zero()) {
        return Err(Error::InvalidParameter(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let n = T::from_usize_lossy(c.len());
    let lmax = lambdas.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let lmin = lambdas.iter().fold(T::infinity(), |a, &b| a.min(b));
    let lbar = lambda_sum(lambdas) / n;
    let condition_ii = lmax - lmin > T::lit(DEGENERATE_SPREAD) * lmax.abs();
    let (qp0, _) = q_derivatives(c, lambdas, T::zero())?;
    let condition_i = qp0 < T::zero();

    let finish = |t: T, qp: T, iterations: usize, status: RemlStatus| -> Result<RemlFit<T>> {
        Ok(RemlFit {
            t_hat: t,
            sigma2_hat: profiled_sigma2(c, lambdas, t)?,
            edf: edf(lambdas, t)?,
            q_value: q_objective(c, lambdas, t)?,
            condition_i,
            condition_ii,
            psi_at_t_hat: psi(c, lambdas, t)?,
            q_prime_at_t_hat: qp,
            iterations,
            status,
        })
    };

    if !condition_ii {
        return finish(T::zero(), qp0, 0, RemlStatus::Degenerate);
    }
    if !condition_i {
        return finish(T::zero(), qp0, 0, RemlStatus::BoundaryZero);
    }

    let lpos_min = lambdas
        .iter()
        .filter(|&&l| l > T::zero())
        .fold(T::infinity(), |a, &b| a.min(b));
    let limit = T::lit(BRACKET_LIMIT) / lpos_min;
    let mut lo = T::zero();
    let mut hi = T::one() / lbar;
    let mut iterations = 0;
    loop {
        let (qp, _) = q_derivatives(c, lambdas, hi)?;
        iterations += 1;
        if qp > T::zero() {
            break;
        }
        if qp == T::zero() {
            return finish(hi, qp, iterations, RemlStatus::InteriorRoot);
        }
        lo = hi;
        hi = hi + hi;
        if hi > limit {
            return Err(Error::NoUpperBracket { t: hi.as_f64() });
        }
    }

    let two = T::lit(2.0);
    let mut t = (lo + hi) / two;
    for _ in 0..MAX_ITERATIONS {
        let (qp, qpp) = q_derivatives(c, lambdas, t)?;
        iterations += 1;
        if (qp / lbar).abs() <= rel_tol {
            return finish(t, qp, iterations, RemlStatus::InteriorRoot);
        }
        if qp < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - qp / qpp;
        let next = if qpp > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / two
        };
        let step = (next - t).abs();
        t = next;
        if step <= rel_tol * t || hi - lo <= rel_tol * t {
            let (qp, _) = q_derivatives(c, lambdas, t)?;
            return finish(t, qp, iterations, RemlStatus::InteriorRoot);
        }
    }
    Err(Error::InvalidParameter(format!(
        "REML solver did not converge in {MAX_ITERATIONS} iterations"
    )))
}
