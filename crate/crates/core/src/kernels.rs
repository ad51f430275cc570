//! Training operators `H` and their cross operators `h(x, X)`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_len, Error, Result};
use crate::mlp::MlpNetwork;
use crate::scalar::Real;

/// Maps a new input `x` to the vector `h(x, X)` against the training inputs.
pub type CrossFn<T> = Arc<dyn Fn(ArrayView1<T>) -> Result<Array1<T>> + Send + Sync>;

#[derive(Clone)]
pub enum KernelSpec<T> {
    /// `h(x, x') = x^T x'`.
    Linear,
    /// Gaussian RBF `exp(-||x - x'||^2 / (2 bandwidth^2))`.
    Rbf { bandwidth: T },
    /// Infinite-width NTK of a bias-free fully connected ReLU network with
    /// `depth` hidden layers.
    NtkAnalytic { depth: usize },
    /// Empirical NTK of a finite network at its current weights.
    NtkEmpirical { network: Arc<MlpNetwork<T>> },
}

impl<T: Real> fmt::Debug for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "Linear"),
            KernelSpec::Rbf { bandwidth } => write!(f, "Rbf {{ bandwidth: {bandwidth} }}"),
            KernelSpec::NtkAnalytic { depth } => write!(f, "NtkAnalytic {{ depth: {depth} }}"),
            KernelSpec::NtkEmpirical { network } => {
                write!(f, "NtkEmpirical {{ widths: {:?} }}", network.widths())
            }
        }
    }
}

impl<T: Real> KernelSpec<T> {
    pub fn gram(&self, x: ArrayView2<T>) -> Result<GramResult<T>> {
        match self {
            KernelSpec::Linear => gram_linear(x),
            KernelSpec::Rbf { bandwidth } => gram_rbf(x, *bandwidth),
            KernelSpec::NtkAnalytic { depth } => gram_ntk_analytic(x, *depth),
            KernelSpec::NtkEmpirical { network } => gram_ntk_empirical(x, network.clone()),
        }
    }
}

/// Training Gram matrix together with its cross operator.
#[derive(Clone)]
pub struct GramResult<T> {
    pub h: Array2<T>,
    cross: CrossFn<T>,
}

impl<T: Real> fmt::Debug for GramResult<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramResult")
            .field("h", &self.h)
            .finish_non_exhaustive()
    }
}

impl<T: Real> GramResult<T> {
    pub fn new(h: Array2<T>, cross: CrossFn<T>) -> Self {
        Self { h, cross }
    }

    pub fn cross(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        (self.cross)(x)
    }

    pub fn cross_fn(&self) -> CrossFn<T> {
        self.cross.clone()
    }

    /// Cross-operator rows for every row of `x_new`, shape `(m, n)`.
    pub fn cross_matrix(&self, x_new: ArrayView2<T>) -> Result<Array2<T>> {
        let n = self.h.nrows();
        let mut out = Array2::zeros((x_new.nrows(), n));
        for (i, row) in x_new.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.cross(row)?);
        }
        Ok(out)
    }
}

fn check_design<T: Real>(x: ArrayView2<T>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidParameter(format!(
            "design matrix must be nonempty, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("design matrix has non-finite entries".into()));
    }
    Ok(())
}

pub fn gram_linear<T: Real>(x: ArrayView2<T>) -> Result<GramResult<T>> {
    check_design(x)?;
    let h = x.dot(&x.t());
    let xs = Arc::new(x.to_owned());
    let d = x.ncols();
    let cross: CrossFn<T> = Arc::new(move |v: ArrayView1<T>| {
        check_len("input width", d, v.len())?;
        Ok(xs.dot(&v))
    });
    Ok(GramResult::new(h, cross))
}

pub fn gram_rbf<T: Real>(x: ArrayView2<T>, bandwidth: T) -> Result<GramResult<T>> {
    check_design(x)?;
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let scale = T::one() / (T::lit(2.0) * bandwidth * bandwidth);
    let rbf = move |a: ArrayView1<T>, b: ArrayView1<T>| -> T {
        let d2: T = a.iter().zip(b.iter()).map(|(p, q)| (*p - *q) * (*p - *q)).sum();
        (-d2 * scale).exp()
    };
    let n = x.nrows();
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        h[[i, i]] = T::one();
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j));
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    let xs = Arc::new(x.to_owned());
    let d = x.ncols();
    let cross: CrossFn<T> = Arc::new(move |v: ArrayView1<T>| {
        check_len("input width", d, v.len())?;
        Ok(xs.rows().into_iter().map(|r| rbf(r, v)).collect())
    });
    Ok(GramResult::new(h, cross))
}

/// ReLU NTK between two inputs given their NTK-scaled input covariances
/// `sxx = x^T x / d`, `syy`, `sxy`.
///
/// Layer recursion with the ReLU arc-cosine expectations (variance-preserving
/// weight scale 2): with `cos(theta) = sxy / sqrt(sxx syy)`,
/// `sxy <- sqrt(sxx syy) (sin(theta) + (pi - theta) cos(theta)) / pi`,
/// `sdot = (pi - theta) / pi`, and `ntk <- ntk * sdot + sxy`; the diagonal
/// covariances are fixed points of the map.
pub fn relu_ntk_entry<T: Real>(sxx: T, syy: T, sxy: T, depth: usize) -> T {
    let pi = T::PI();
    let norm = (sxx * syy).sqrt();
    let mut cov = sxy;
    let mut ntk = sxy;
    let snap = T::lit(8.0) * T::epsilon();
    for _ in 0..depth {
        let mut rho = (cov / norm).max(-T::one()).min(T::one());
        // Snap roundoff-level departures from parallel inputs; acos amplifies them.
        if T::one() - rho <= snap {
            rho = T::one();
        }
        let theta = rho.acos();
        let next = norm * (theta.sin() + (pi - theta) * rho) / pi;
        let sdot = (pi - theta) / pi;
        ntk = ntk * sdot + next;
        cov = next;
    }
    ntk
}

pub fn gram_ntk_analytic<T: Real>(x: ArrayView2<T>, depth: usize) -> Result<GramResult<T>> {
    check_design(x)?;
    if depth == 0 {
        return Err(Error::InvalidParameter("NTK depth must be at least 1".into()));
    }
    let n = x.nrows();
    let d = x.ncols();
    let inv_d = T::one() / T::from_usize_lossy(d);
    let sq: Array1<T> = x.map_axis(Axis(1), |r| r.dot(&r) * inv_d);
    if let Some(row) = sq.iter().position(|&s| s <= T::zero()) {
        return Err(Error::ZeroNormInput { row });
    }
    let gram = x.dot(&x.t()) * inv_d;
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            // acos is ill-conditioned at rho = 1; use the exact self-covariance.
            let sxy = if i == j { sq[i] } else { gram[[i, j]] };
            let v = relu_ntk_entry(sq[i], sq[j], sxy, depth);
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    let xs = Arc::new(x.to_owned());
    let sq = Arc::new(sq);
    let cross: CrossFn<T> = Arc::new(move |v: ArrayView1<T>| {
        check_len("input width", d, v.len())?;
        let svv = v.dot(&v) * inv_d;
        if svv <= T::zero() {
            return Err(Error::ZeroNormInput { row: 0 });
        }
        let dots = xs.dot(&v) * inv_d;
        Ok(dots
            .iter()
            .zip(sq.iter())
            .map(|(&sxy, &sxx)| relu_ntk_entry(sxx, svv, sxy, depth))
            .collect())
    });
    Ok(GramResult::new(h, cross))
}

/// Empirical NTK `H_ij = <grad f(x_i), grad f(x_j)>` at the network's current weights.
pub fn gram_ntk_empirical<T: Real>(
    x: ArrayView2<T>,
    network: Arc<MlpNetwork<T>>,
) -> Result<GramResult<T>> {
    check_design(x)?;
    check_len("input width", network.input_dim(), x.ncols())?;
    let feats = Arc::new(network.ntk_features(x)?);
    let h = feats.gram();
    let cross: CrossFn<T> = Arc::new(move |v: ArrayView1<T>| {
        let other = network.ntk_features(v.insert_axis(Axis(0)))?;
        feats.cross(&other)
    });
    Ok(GramResult::new(h, cross))
}
