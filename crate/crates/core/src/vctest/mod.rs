//! Variance-component score test for training-induced signal.
//!
//! The response is projected onto the orthogonal complement of the initial
//! prediction `f0(X)`, which removes `f0` without estimating a scale for it.
//! Under the null the projected response is isotropic, so the ratio statistic
//! `T = (n-1) y~' H~ y~ / y~' y~` has the law of a weighted chi-square
//! comparison and its p-value is computed exactly.

mod imhof;

pub use imhof::{
    imhof, pvalue_monte_carlo, pvalue_weighted_chisq, PValue, PValueMethod, DEFAULT_MC_SAMPLES,
    DEFAULT_MC_SEED, DEFAULT_PVALUE_TOL,
};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{check_len, Error, Result};
use crate::spectral::{relative_asymmetry, symmetric_eigenvalues, symmetry_tolerance};
use crate::Real;

/// Projected weights below this fraction of the projected spectral radius are
/// treated as zero; they are rounding noise of the projection.
const SPECTRAL_ZERO_REL: f64 = 1e-12;
const ZERO_INIT_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTestResult<T> {
    pub statistic: T,
    pub p_value: f64,
    /// Eigenvalues of `H~ = M' H M`, descending.
    pub projected_eigenvalues: Array1<T>,
    pub method: PValueMethod,
    pub integration_error: f64,
    /// `f0` was numerically zero and the mean-centering basis was used instead.
    pub centering_fallback: bool,
}

/// Householder reflection `P = I - beta v v'` with `P u = -sign(u_0) e_0` for `u = a / |a|`.
struct Reflector<T> {
    v: Array1<T>,
    beta: T,
}

impl<T: Real> Reflector<T> {
    fn new(a: ArrayView1<T>) -> Result<Self> {
        let n = a.len();
        let norm = a.dot(&a).sqrt();
        if !(norm > T::lit(ZERO_INIT_REL) * T::from_usize_lossy(n).sqrt()) {
            return Err(Error::ZeroInitialization);
        }
        let mut v = a.mapv(|x| x / norm);
        let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
        v[0] += sign;
        let beta = T::lit(2.0) / v.dot(&v);
        Ok(Self { v, beta })
    }

    fn apply(&self, x: ArrayView1<T>) -> Array1<T> {
        let k = self.beta * self.v.dot(&x);
        &x - &(&self.v * k)
    }

    /// Columns `1..n` of `P`.
    fn complement(&self) -> Array2<T> {
        let n = self.v.len();
        let mut m = Array2::zeros((n, n - 1));
        for i in 0..n {
            for j in 1..n {
                let delta = if i == j { T::one() } else { T::zero() };
                m[[i, j - 1]] = delta - self.beta * self.v[i] * self.v[j];
            }
        }
        m
    }

    /// `P H P` by the rank-two update `H - v w' - w v'`.
    fn conjugate(&self, h: ArrayView2<T>) -> Array2<T> {
        let p = h.dot(&self.v) * self.beta;
        let k = self.beta * self.v.dot(&p) * T::lit(0.5);
        let w = &p - &(&self.v * k);
        let n = self.v.len();
        let mut out = h.to_owned();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] -= self.v[i] * w[j] + w[i] * self.v[j];
            }
        }
        out
    }
}

/// Orthonormal basis `M` (n x (n-1)) of the complement of `f0`.
pub fn orthogonal_complement_basis<T: Real>(f0: ArrayView1<T>) -> Result<Array2<T>> {
    if f0.len() < 2 {
        return Err(Error::TooFewSamples { n: f0.len(), min: 2 });
    }
    Ok(Reflector::new(f0)?.complement())
}

/// Orthonormal basis of the complement of the all-ones vector.
pub fn centering_basis<T: Real>(n: usize) -> Result<Array2<T>> {
    orthogonal_complement_basis(Array1::from_elem(n, T::one()).view())
}

struct Projected<T> {
    statistic: T,
    eigenvalues: Array1<T>,
    centering_fallback: bool,
}

fn project<T: Real>(y: ArrayView1<T>, f0: ArrayView1<T>, h: ArrayView2<T>) -> Result<Projected<T>> {
    let n = y.len();
    if n < 3 {
        return Err(Error::TooFewSamples { n, min: 3 });
    }
    check_len("initial predictions", n, f0.len())?;
    check_len("operator rows", n, h.nrows())?;
    check_len("operator columns", n, h.ncols())?;
    let asym = relative_asymmetry(h);
    if asym > symmetry_tolerance::<T>() {
        return Err(Error::NonSymmetric {
            asymmetry: asym.as_f64(),
        });
    }

    let (refl, centering_fallback) = match Reflector::new(f0) {
        Ok(r) => (r, false),
        Err(Error::ZeroInitialization) => {
            (Reflector::new(Array1::from_elem(n, T::one()).view())?, true)
        }
        Err(e) => return Err(e),
    };
    let py = refl.apply(y);
    let yt = py.slice(s![1..]);
    let yy = yt.dot(&yt);
    let ynorm2 = y.dot(&y);
    if !(yy > T::lit(1e-24) * ynorm2) || yy == T::zero() {
        return Err(Error::ZeroProjectedResponse);
    }
    let phb = refl.conjugate(h);
    let ht = phb.slice(s![1.., 1..]);
    let quad = yt.dot(&ht.dot(&yt));
    let statistic = T::from_usize_lossy(n - 1) * quad / yy;
    let eigenvalues = symmetric_eigenvalues(ht)?;
    Ok(Projected {
        statistic,
        eigenvalues,
        centering_fallback,
    })
}

/// `T = (n-1) y~' H~ y~ / y~' y~` with the spectrum of `H~`; the p-value
/// fields are left at `p = 1`, `Exact`.
pub fn score_statistic<T: Real>(
    y: ArrayView1<T>,
    f0: ArrayView1<T>,
    h: ArrayView2<T>,
) -> Result<ScoreTestResult<T>> {
    let pr = project(y, f0, h)?;
    Ok(ScoreTestResult {
        statistic: pr.statistic,
        p_value: 1.0,
        projected_eigenvalues: pr.eigenvalues,
        method: PValueMethod::Exact,
        integration_error: 0.0,
        centering_fallback: pr.centering_fallback,
    })
}

/// `P(sum_k (mu_k - stat/(n-1)) z_k^2 >= 0)` for projected eigenvalues `mu`.
pub fn null_pvalue<T: Real>(projected: ArrayView1<T>, statistic: T, tol: f64) -> Result<PValue> {
    let m = projected.len() as f64;
    let q = statistic.as_f64() / m;
    let scale = projected.iter().fold(0.0f64, |a, &b| a.max(b.as_f64().abs()));
    let w: Vec<f64> = projected
        .iter()
        .map(|&mu| mu.as_f64() - q)
        .filter(|w| w.abs() > SPECTRAL_ZERO_REL * scale)
        .collect();
    if w.is_empty() {
        return Ok(PValue {
            p: 1.0,
            err: 0.0,
            method: PValueMethod::Exact,
        });
    }
    pvalue_weighted_chisq(&w, tol)
}

pub fn score_test<T: Real>(
    y: ArrayView1<T>,
    f0: ArrayView1<T>,
    h: ArrayView2<T>,
) -> Result<ScoreTestResult<T>> {
    score_test_with_tol(y, f0, h, DEFAULT_PVALUE_TOL)
}

pub fn score_test_with_tol<T: Real>(
    y: ArrayView1<T>,
    f0: ArrayView1<T>,
    h: ArrayView2<T>,
    tol: f64,
) -> Result<ScoreTestResult<T>> {
    let mut res = score_statistic(y, f0, h)?;
    let pv = null_pvalue(res.projected_eigenvalues.view(), res.statistic, tol)?;
    res.p_value = pv.p;
    res.method = pv.method;
    res.integration_error = pv.err;
    Ok(res)
}
