//! Eigendecomposition of a training operator and the eigenbasis actions every
//! flow formula is built from.

mod symeig;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Default relative threshold below which eigenvalues are snapped to zero.
pub const DEFAULT_CLAMP_REL_TOL: f64 = 1e-12;

/// Eigendecomposition `H = V diag(lambda) V^T` of a symmetric PSD operator.
///
/// Eigenvalues are sorted descending and are all `>= 0`; eigenvalues whose
/// magnitude falls below `clamp_rel_tol * lambda_1` are stored as exactly
/// zero and excluded from [`rank`](Self::rank). Each eigenvector has its
/// largest-magnitude entry positive.
#[derive(Debug, Clone)]
pub struct SpectralOperator<T> {
    eigenvalues: Array1<T>,
    eigenvectors: Array2<T>,
    rank: usize,
    mean_eigenvalue: T,
    clamp_threshold: T,
}

pub(crate) fn check_time<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t.as_f64()))
    }
}

/// Relative asymmetry `max|H - H^T| / max|H|` (zero for the zero matrix).
pub fn relative_asymmetry<T: Real>(h: ArrayView2<T>) -> T {
    let n = h.nrows();
    let mut scale = T::zero();
    let mut asym = T::zero();
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(h[[i, j]].abs());
            if j > i {
                asym = asym.max((h[[i, j]] - h[[j, i]]).abs());
            }
        }
    }
    if scale > T::zero() {
        asym / scale
    } else {
        T::zero()
    }
}

pub(crate) fn symmetry_tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::lit(100.0) * T::epsilon())
}

fn symmetrized_buffer<T: Real>(h: ArrayView2<T>) -> Result<Vec<T>> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            what: "operator columns",
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    if h.nrows() == 0 {
        return Err(Error::InvalidParameter("operator must be at least 1x1".into()));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("operator has non-finite entries".into()));
    }
    let asym = relative_asymmetry(h);
    if asym > symmetry_tolerance::<T>() {
        return Err(Error::NonSymmetric {
            asymmetry: asym.as_f64(),
        });
    }
    let n = h.nrows();
    let half = T::lit(0.5);
    let mut buf = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = if i == j {
                h[[i, i]]
            } else {
                half * (h[[i, j]] + h[[j, i]])
            };
        }
    }
    Ok(buf)
}

/// Eigenvalues of a symmetric matrix, sorted descending, without eigenvectors
/// and without PSD clamping.
pub fn symmetric_eigenvalues<T: Real>(h: ArrayView2<T>) -> Result<Array1<T>> {
    let n = h.nrows();
    let buf = symmetrized_buffer(h)?;
    let raw = symeig::symmetric_eigen(&buf, n, false)?;
    Ok(raw.values.into_iter().rev().collect())
}

impl<T: Real> SpectralOperator<T> {
    /// Decomposes `h` with the default clamp tolerance.
    pub fn new(h: ArrayView2<T>) -> Result<Self> {
        Self::eigendecompose(h, T::lit(DEFAULT_CLAMP_REL_TOL))
    }

    pub fn eigendecompose(h: ArrayView2<T>, clamp_rel_tol: T) -> Result<Self> {
        if !(clamp_rel_tol >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "clamp_rel_tol must be nonnegative, got {clamp_rel_tol}"
            )));
        }
        let n = h.nrows();
        let buf = symmetrized_buffer(h)?;
        let raw = symeig::symmetric_eigen(&buf, n, true)?;
        let rows = raw.vectors_rows.expect("vectors requested");

        let top = raw
            .values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()));
        let threshold = clamp_rel_tol * top;

        let mut eigenvalues = Array1::zeros(n);
        let mut eigenvectors = Array2::zeros((n, n));
        // Ascending from the solver; store descending.
        for (col, k) in (0..n).rev().enumerate() {
            let lambda = raw.values[k];
            if lambda < -threshold {
                return Err(Error::NotPsd {
                    eigenvalue: lambda.as_f64(),
                    threshold: threshold.as_f64(),
                });
            }
            eigenvalues[col] = if lambda.abs() <= threshold {
                T::zero()
            } else {
                lambda
            };
            let v = &rows[k * n..(k + 1) * n];
            let mut pivot = 0;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if v[pivot] < T::zero() { -T::one() } else { T::one() };
            for (i, x) in v.iter().enumerate() {
                eigenvectors[[i, col]] = sign * *x;
            }
        }
        let rank = eigenvalues.iter().filter(|&&l| l > T::zero()).count();
        let mean_eigenvalue = eigenvalues.sum() / T::from_usize_lossy(n);
        Ok(Self {
            eigenvalues,
            eigenvectors,
            rank,
            mean_eigenvalue,
            clamp_threshold: threshold,
        })
    }

    /// Builds an operator from an already-known orthonormal basis and
    /// nonnegative descending eigenvalues.
    pub fn from_parts(eigenvalues: Array1<T>, eigenvectors: Array2<T>) -> Result<Self> {
        let n = eigenvalues.len();
        check_len("eigenvector rows", n, eigenvectors.nrows())?;
        check_len("eigenvector columns", n, eigenvectors.ncols())?;
        if n == 0 {
            return Err(Error::InvalidParameter("operator must be at least 1x1".into()));
        }
        if eigenvalues.iter().any(|&l| !(l >= T::zero()) || !l.is_finite()) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        if eigenvalues
            .iter()
            .zip(eigenvalues.iter().skip(1))
            .any(|(a, b)| a < b)
        {
            return Err(Error::InvalidParameter(
                "eigenvalues must be sorted descending".into(),
            ));
        }
        let rank = eigenvalues.iter().filter(|&&l| l > T::zero()).count();
        let mean_eigenvalue = eigenvalues.sum() / T::from_usize_lossy(n);
        Ok(Self {
            eigenvalues,
            eigenvectors,
            rank,
            mean_eigenvalue,
            clamp_threshold: T::zero(),
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, T> {
        self.eigenvalues.view()
    }

    /// Orthonormal eigenvectors as columns.
    pub fn eigenvectors(&self) -> ArrayView2<'_, T> {
        self.eigenvectors.view()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mean_eigenvalue(&self) -> T {
        self.mean_eigenvalue
    }

    pub fn clamp_threshold(&self) -> T {
        self.clamp_threshold
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct_operator(&self) -> Array2<T> {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(ndarray::Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }

    /// Coefficients `c_k = v_k^T r`.
    pub fn project(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        check_len("vector", self.n(), r.len())?;
        Ok(self.eigenvectors.t().dot(&r))
    }

    /// `V c`, the inverse of [`project`](Self::project).
    pub fn reconstruct(&self, c: ArrayView1<T>) -> Result<Array1<T>> {
        check_len("coefficients", self.n(), c.len())?;
        Ok(self.eigenvectors.dot(&c))
    }

    /// `exp(-tH) r`.
    pub fn decay_action(&self, t: T, r: ArrayView1<T>) -> Result<Array1<T>> {
        check_time(t)?;
        check_len("vector", self.n(), r.len())?;
        if t == T::zero() {
            return Ok(r.to_owned());
        }
        let mut c = self.project(r)?;
        Zip::from(&mut c)
            .and(&self.eigenvalues)
            .for_each(|c, &l| *c *= (-t * l).exp());
        self.reconstruct(c.view())
    }

    /// Spectral filter `g_k = (1 - exp(-t lambda_k)) / lambda_k` of `H^+ (I - exp(-tH))`,
    /// zero on clamped directions.
    pub fn pinv_flow_filter(&self, t: T) -> Result<Array1<T>> {
        check_time(t)?;
        Ok(self.eigenvalues.mapv(|l| {
            if l > T::zero() {
                -(-t * l).exp_m1() / l
            } else {
                T::zero()
            }
        }))
    }

    /// `H^+ (I - exp(-tH)) r`: weights for the cross-operator extension.
    pub fn pinv_flow_weights(&self, t: T, r: ArrayView1<T>) -> Result<Array1<T>> {
        let g = self.pinv_flow_filter(t)?;
        check_len("vector", self.n(), r.len())?;
        let c = self.project(r)? * &g;
        self.reconstruct(c.view())
    }
}
