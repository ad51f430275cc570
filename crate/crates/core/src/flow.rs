//! Closed-form fixed-operator gradient flow and its random-effects dual.
//!
//! With `r0 = y - f0(X)` and `c = V^T r0`, the flow started at `f0` is
//! `f_t(X) = f0(X) + (I - exp(-tH)) r0`. Every quantity here is evaluated in
//! the eigenbasis of `H`.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2, Zip};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::kernels::CrossFn;
use crate::scalar::{log_sum_exp, Real};
use crate::spectral::{check_time, SpectralOperator};

/// Initial prediction `f0(x)` for a new input.
pub type InitFn<T> = Arc<dyn Fn(ArrayView1<T>) -> Result<T> + Send + Sync>;

/// Flow trajectory of one training problem.
#[derive(Clone)]
pub struct FlowModel<T> {
    op: SpectralOperator<T>,
    f0_train: Array1<T>,
    residual: Array1<T>,
    coeffs: Array1<T>,
    cross: Option<CrossFn<T>>,
    f0_fn: Option<InitFn<T>>,
}

impl<T: Real> std::fmt::Debug for FlowModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowModel")
            .field("n", &self.op.n())
            .field("rank", &self.op.rank())
            .field("has_cross", &self.cross.is_some())
            .field("has_f0_fn", &self.f0_fn.is_some())
            .finish()
    }
}

/// Variance split between noise and training-induced signal at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceAllocation<T> {
    pub t: T,
    /// `n^{-1} sum_k exp(t lambda_k)`; may be `inf` when only its log is representable.
    pub gamma_t: T,
    pub log_gamma_t: T,
    /// `sigma^2 / gamma_t`.
    pub sigma2_eps_t: T,
    pub noise_trace: T,
    pub signal_trace: T,
    /// `1 - n / sum_k exp(t lambda_k)`.
    pub explained_proportion: T,
}

/// Per-eigendirection fitted coefficients `a_k = c_k (1 - exp(-t lambda_k))`
/// and optimized spectral losses `J_k = c_k^2 exp(-t lambda_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients<T> {
    pub fitted: Array1<T>,
    pub losses: Array1<T>,
}

impl<T: Real> FlowModel<T> {
    pub fn build(
        op: SpectralOperator<T>,
        f0_train: Array1<T>,
        y: ArrayView1<T>,
        cross: Option<CrossFn<T>>,
        f0_fn: Option<InitFn<T>>,
    ) -> Result<Self> {
        check_len("initial predictions", op.n(), f0_train.len())?;
        check_len("response", op.n(), y.len())?;
        let residual = &y - &f0_train;
        let coeffs = op.project(residual.view())?;
        Ok(Self {
            op,
            f0_train,
            residual,
            coeffs,
            cross,
            f0_fn,
        })
    }

    pub fn op(&self) -> &SpectralOperator<T> {
        &self.op
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn f0_train(&self) -> ArrayView1<'_, T> {
        self.f0_train.view()
    }

    /// `r0 = y - f0(X)`.
    pub fn residual(&self) -> ArrayView1<'_, T> {
        self.residual.view()
    }

    /// `c_k = v_k^T r0`.
    pub fn coeffs(&self) -> ArrayView1<'_, T> {
        self.coeffs.view()
    }

    pub fn has_cross(&self) -> bool {
        self.cross.is_some() && self.f0_fn.is_some()
    }

    /// `f0(X) + (I - exp(-tH)) r0`.
    pub fn fit_in_sample(&self, t: T) -> Result<Array1<T>> {
        check_time(t)?;
        if t == T::zero() {
            return Ok(self.f0_train.clone());
        }
        let fitted = self.spectral_coefficients(t)?.fitted;
        Ok(&self.f0_train + &self.op.reconstruct(fitted.view())?)
    }

    /// `y - f_t(X) = exp(-tH) r0`.
    pub fn residual_at(&self, t: T) -> Result<Array1<T>> {
        self.op.decay_action(t, self.residual.view())
    }

    /// `||y - f_t(X)||^2 / n`, from the eigen-coefficients.
    pub fn train_mse(&self, t: T) -> Result<T> {
        check_time(t)?;
        let two = T::lit(2.0);
        let s: T = self
            .coeffs
            .iter()
            .zip(self.op.eigenvalues())
            .map(|(&c, &l)| c * c * (-two * t * l).exp())
            .sum();
        Ok(s / T::from_usize_lossy(self.n()))
    }

    /// Eigen-residuals `exp(-t lambda_k / 2) c_k`.
    pub fn eigen_residuals(&self, t: T) -> Result<Array1<T>> {
        check_time(t)?;
        let half = T::lit(0.5);
        Ok(Zip::from(&self.coeffs)
            .and(self.op.eigenvalues())
            .map_collect(|&c, &l| c * (-half * t * l).exp()))
    }

    /// Out-of-sample prediction `f0(x) + h(x, X) H^+ (I - exp(-tH)) r0`.
    pub fn predict(&self, x: ArrayView1<T>, t: T) -> Result<T> {
        let (cross, f0) = self.cross_parts()?;
        let w = self.op.pinv_flow_weights(t, self.residual.view())?;
        Ok(f0(x)? + cross(x)?.dot(&w))
    }

    /// [`predict`](Self::predict) for every row of `x`, sharing the weight vector.
    pub fn predict_many(&self, x: ArrayView2<T>, t: T) -> Result<Array1<T>> {
        let (cross, f0) = self.cross_parts()?;
        let w = self.op.pinv_flow_weights(t, self.residual.view())?;
        x.rows()
            .into_iter()
            .map(|row| Ok(f0(row)? + cross(row)?.dot(&w)))
            .collect()
    }

    fn cross_parts(&self) -> Result<(&CrossFn<T>, &InitFn<T>)> {
        match (&self.cross, &self.f0_fn) {
            (Some(c), Some(f)) => Ok((c, f)),
            _ => Err(Error::MissingCrossOperator),
        }
    }

    /// BLUP of the random effect, `Cov(u_t, r0) var(r0)^{-1} r0` with
    /// `Cov(u_t, r0) = s (exp(tH) - I)` and `var(r0) = s exp(tH)`, `s = 1/gamma_t`.
    ///
    /// Evaluated from the covariance blocks rather than the simplified flow
    /// filter, so agreement with [`fit_in_sample`](Self::fit_in_sample) is a
    /// real check.
    pub fn blup(&self, t: T) -> Result<Array1<T>> {
        check_time(t)?;
        let lambdas = self.op.eigenvalues();
        let n = T::from_usize_lossy(self.n());
        let top = lambdas.iter().fold(T::zero(), |m, &l| m.max(t * l));
        // Common factor exp(-shift) keeps exp(t lambda) finite; it cancels.
        let shift = if top > T::lit(700.0) { top } else { T::zero() };
        let mean_e: T = lambdas.iter().map(|&l| (t * l - shift).exp()).sum::<T>() / n;
        let s = T::one() / mean_e;

        let mut out = Array1::zeros(self.n());
        for (k, (&c, &l)) in self.coeffs.iter().zip(lambdas).enumerate() {
            let (cov, var) = if shift == T::zero() {
                (s * (t * l).exp_m1(), s * (t * l).exp())
            } else {
                (
                    s * ((t * l - shift).exp() - (-shift).exp()),
                    s * (t * l - shift).exp(),
                )
            };
            out[k] = if var > T::zero() {
                cov / var * c
            } else {
                -(-t * l).exp_m1() * c
            };
        }
        self.op.reconstruct(out.view())
    }

    /// Fitted coefficients and optimized spectral losses per eigendirection.
    /// Clamped (zero) eigenvalues give `a_k = 0` and `J_k = c_k^2`.
    pub fn spectral_coefficients(&self, t: T) -> Result<SpectralCoefficients<T>> {
        check_time(t)?;
        let lambdas = self.op.eigenvalues();
        let fitted = Zip::from(&self.coeffs)
            .and(lambdas)
            .map_collect(|&c, &l| c * -(-t * l).exp_m1());
        let losses = Zip::from(&self.coeffs)
            .and(lambdas)
            .map_collect(|&c, &l| c * c * (-t * l).exp());
        Ok(SpectralCoefficients { fitted, losses })
    }

    pub fn variance_allocation(&self, t: T, sigma2: T) -> Result<VarianceAllocation<T>> {
        variance_allocation(self.op.eigenvalues(), t, sigma2)
    }
}

/// Noise/signal variance split for eigenvalues `lambdas` at time `t` and base
/// noise variance `sigma2`, computed through `log sum exp(t lambda_k)`.
pub fn variance_allocation<T: Real>(
    lambdas: ArrayView1<T>,
    t: T,
    sigma2: T,
) -> Result<VarianceAllocation<T>> {
    check_time(t)?;
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    if lambdas.is_empty() {
        return Err(Error::TooFewSamples { n: 0, min: 1 });
    }
    let n = T::from_usize_lossy(lambdas.len());
    let log_gamma_t = log_sum_exp(lambdas.iter().map(|&l| t * l)) - n.ln();
    let inv_gamma = (-log_gamma_t).exp();
    let total = n * sigma2;
    let noise_trace = total * inv_gamma;
    Ok(VarianceAllocation {
        t,
        gamma_t: log_gamma_t.exp(),
        log_gamma_t,
        sigma2_eps_t: sigma2 * inv_gamma,
        noise_trace,
        signal_trace: total - noise_trace,
        explained_proportion: -(-log_gamma_t).exp_m1(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gram_linear;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Array2::from_shape_fn((n, rank), |_| rng.random_range(-1.0..1.0));
        b.dot(&b.t())
    }

    fn random_vec(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0))
    }

    fn scalar_model(lambda: f64, f0: f64, y: f64) -> FlowModel<f64> {
        let op = SpectralOperator::new(array![[lambda]].view()).unwrap();
        FlowModel::build(op, array![f0], array![y].view(), None, None).unwrap()
    }

    fn max_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn build_examples() {
        let op = SpectralOperator::new(random_psd(8, 8, 1).view()).unwrap();
        let y = random_vec(8, 2);
        let m = FlowModel::build(op.clone(), y.clone(), y.view(), None, None).unwrap();
        assert!(m.coeffs().iter().all(|&c| c == 0.0));
        let m = FlowModel::build(op.clone(), Array1::zeros(8), y.view(), None, None).unwrap();
        assert_eq!(m.residual(), y.view());
        let f0 = random_vec(8, 3);
        let m = FlowModel::build(op.clone(), f0.clone(), y.view(), None, None).unwrap();
        let r = &y - &f0;
        let c = m.coeffs();
        assert!((c.dot(&c).sqrt() - r.dot(&r).sqrt()).abs() < 1e-12);
        assert!(FlowModel::build(op, Array1::zeros(7), y.view(), None, None).is_err());
    }

    #[test]
    fn fit_in_sample_examples() {
        let m = scalar_model(1.0, 0.0, 2.0);
        let out = m.fit_in_sample(2f64.ln()).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert!(m.fit_in_sample(-1.0).is_err());

        let op = SpectralOperator::new(random_psd(6, 6, 4).view()).unwrap();
        let lmin = op.eigenvalues()[5];
        let f0 = random_vec(6, 5);
        let y = random_vec(6, 6);
        let m = FlowModel::build(op, f0.clone(), y.view(), None, None).unwrap();
        assert_eq!(m.fit_in_sample(0.0).unwrap(), f0);
        assert!(max_diff(&m.fit_in_sample(50.0 / lmin).unwrap(), &y) < 1e-8);
    }

    #[test]
    fn predict_examples() {
        // One training point x1 = 2 with linear kernel: H = 4, h(x, X) = 2x.
        let x = array![[2.0]];
        let g = gram_linear(x.view()).unwrap();
        let op = SpectralOperator::new(g.h.view()).unwrap();
        let f0_fn: InitFn<f64> = Arc::new(|v: ArrayView1<f64>| Ok(0.1 * v[0]));
        let m = FlowModel::build(op, array![0.2], array![1.0].view(), Some(g.cross_fn()), Some(f0_fn))
            .unwrap();
        let t = 0.3;
        let xn = array![-1.5];
        let want = 0.1 * -1.5 + (2.0 * -1.5) * (1.0 - (-4.0f64 * t).exp()) / 4.0 * 0.8;
        assert!((m.predict(xn.view(), t).unwrap() - want).abs() < 1e-14);
        assert!((m.predict(xn.view(), 0.0).unwrap() - 0.1 * -1.5).abs() < 1e-15);

        let bare = scalar_model(1.0, 0.0, 1.0);
        assert_eq!(bare.predict(xn.view(), t).unwrap_err(), Error::MissingCrossOperator);
    }

    #[test]
    fn predict_at_training_points_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Array2::from_shape_fn((5, 6), |_| rng.random_range(-1.0..1.0));
        let g = gram_linear(x.view()).unwrap();
        let op = SpectralOperator::new(g.h.view()).unwrap();
        assert_eq!(op.rank(), 5);
        let f0_fn: InitFn<f64> = Arc::new(|_| Ok(0.0));
        let y = random_vec(5, 11);
        let m = FlowModel::build(op, Array1::zeros(5), y.view(), Some(g.cross_fn()), Some(f0_fn))
            .unwrap();
        for t in [0.1, 1.0, 7.0] {
            let fit = m.fit_in_sample(t).unwrap();
            let pred = m.predict_many(x.view(), t).unwrap();
            assert!(max_diff(&fit, &pred) < 1e-8);
        }
    }

    #[test]
    fn blup_examples() {
        let m = scalar_model(1.0, 0.0, 2.0);
        assert_eq!(m.blup(0.0).unwrap()[0], 0.0);
        assert!((m.blup(2f64.ln()).unwrap()[0] - 1.0).abs() < 1e-15);

        let op = SpectralOperator::new(random_psd(10, 10, 12).view()).unwrap();
        let f0 = random_vec(10, 13);
        let m = FlowModel::build(op, f0.clone(), random_vec(10, 14).view(), None, None).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let lhs = &f0 + &m.blup(t).unwrap();
            assert!(max_diff(&lhs, &m.fit_in_sample(t).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn blup_survives_exponent_overflow() {
        let op = SpectralOperator::new(random_psd(6, 6, 15).view()).unwrap();
        let m = FlowModel::build(op.clone(), Array1::zeros(6), random_vec(6, 16).view(), None, None)
            .unwrap();
        let t = 2000.0 / op.eigenvalues()[0];
        let b = m.blup(t).unwrap();
        assert!(b.iter().all(|v| v.is_finite()));
        assert!(max_diff(&b, &m.fit_in_sample(t).unwrap()) < 1e-10);
    }

    #[test]
    fn variance_allocation_examples() {
        let op = SpectralOperator::new(random_psd(4, 4, 17).view()).unwrap();
        let m = FlowModel::build(op, Array1::zeros(4), random_vec(4, 18).view(), None, None).unwrap();
        let va = m.variance_allocation(0.0, 0.25).unwrap();
        assert_eq!(va.explained_proportion, 0.0);
        assert!((va.noise_trace - 1.0).abs() < 1e-15);
        for t in [0.0, 0.5, 3.0, 1e4] {
            let va = m.variance_allocation(t, 0.25).unwrap();
            assert_eq!(va.noise_trace + va.signal_trace, 4.0 * 0.25);
            assert!((0.0..=1.0).contains(&va.explained_proportion));
        }
        let va = m.variance_allocation(1e4, 0.25).unwrap();
        assert!(va.gamma_t.is_infinite() && va.log_gamma_t.is_finite());
        assert!((va.explained_proportion - 1.0).abs() < 1e-12);

        let va = scalar_model(1.0, 0.0, 1.0).variance_allocation(2f64.ln(), 1.0).unwrap();
        assert!((va.explained_proportion - 0.5).abs() < 1e-15);
        assert!((va.sigma2_eps_t - 0.5).abs() < 1e-15);
        assert!(m.variance_allocation(1.0, 0.0).is_err());
    }

    #[test]
    fn spectral_coefficient_examples() {
        let op = SpectralOperator::from_parts(array![2.0, 0.0], Array2::eye(2)).unwrap();
        let m = FlowModel::build(op, Array1::zeros(2), array![2.0, 1.0].view(), None, None).unwrap();
        let sc = m.spectral_coefficients(0.0).unwrap();
        assert_eq!(sc.fitted.to_vec(), vec![0.0, 0.0]);
        assert_eq!(sc.losses.to_vec(), vec![4.0, 1.0]);
        let sc = m.spectral_coefficients(2f64.ln()).unwrap();
        assert!((sc.losses[0] - 1.0).abs() < 1e-15);
        assert_eq!(sc.losses[1], 1.0);
        assert_eq!(sc.fitted[1], 0.0);
        assert!((sc.fitted[0] - 1.5).abs() < 1e-15);
    }

    /// Coordinate descent on the spectrally penalized least-squares objective,
    /// written against the raw basis vectors only.
    fn penalized_coordinate_descent(v: &Array2<f64>, lambdas: &[f64], r: &Array1<f64>, t: f64) -> Vec<f64> {
        let n = lambdas.len();
        let mut a = vec![0.0; n];
        for _ in 0..200 {
            for k in 0..n {
                if lambdas[k] == 0.0 {
                    a[k] = 0.0;
                    continue;
                }
                let mut partial = r.clone();
                for (j, &aj) in a.iter().enumerate() {
                    if j != k {
                        partial -= &(&v.column(j) * aj);
                    }
                }
                let vk = v.column(k);
                let penalty = 1.0 / ((t * lambdas[k]).exp() - 1.0);
                a[k] = vk.dot(&partial) / (vk.dot(&vk) + penalty);
            }
        }
        a
    }

    #[test]
    fn spectral_coefficients_solve_penalized_problem() {
        for seed in 0..4 {
            let op = SpectralOperator::new(random_psd(6, 4, 20 + seed).view()).unwrap();
            let r = random_vec(6, 30 + seed);
            let m = FlowModel::build(op.clone(), Array1::zeros(6), r.view(), None, None).unwrap();
            let t = 0.7;
            let want = penalized_coordinate_descent(
                &op.eigenvectors().to_owned(),
                op.eigenvalues().as_slice().unwrap(),
                &r,
                t,
            );
            let got = m.spectral_coefficients(t).unwrap().fitted;
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-6, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn eigen_residuals_square_to_losses() {
        let op = SpectralOperator::new(random_psd(5, 5, 40).view()).unwrap();
        let m = FlowModel::build(op, Array1::zeros(5), random_vec(5, 41).view(), None, None).unwrap();
        let er = m.eigen_residuals(0.8).unwrap();
        let sc = m.spectral_coefficients(0.8).unwrap();
        for (e, j) in er.iter().zip(&sc.losses) {
            assert!((e * e - j).abs() < 1e-14);
        }
        let r = m.residual_at(0.4).unwrap();
        assert!((r.dot(&r) / 5.0 - m.train_mse(0.4).unwrap()).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn blup_equivalence_and_monotone_training_error(seed in 0u64..10_000, n in 2usize..30) {
            let op = SpectralOperator::new(random_psd(n, n, seed).view()).unwrap();
            let lbar = op.mean_eigenvalue();
            let f0 = random_vec(n, seed + 1);
            let y = random_vec(n, seed + 2);
            let m = FlowModel::build(op, f0.clone(), y.view(), None, None).unwrap();
            let mut prev = f64::INFINITY;
            for s in [0.0, 0.01, 0.1, 1.0, 10.0] {
                let t = s / lbar;
                let fit = m.fit_in_sample(t).unwrap();
                let lhs = &f0 + &m.blup(t).unwrap();
                prop_assert!(max_diff(&lhs, &fit) < 1e-10);
                let a = m.spectral_coefficients(t).unwrap().fitted;
                let u = m.op().reconstruct(a.view()).unwrap();
                prop_assert!(max_diff(&u, &m.blup(t).unwrap()) < 1e-10);
                let err = (&y - &fit).mapv(|v| v * v).sum();
                prop_assert!(err <= prev * (1.0 + 1e-12) + 1e-14);
                prev = err;
            }
        }

        #[test]
        fn explained_proportion_nondecreasing(seed in 0u64..1000) {
            let op = SpectralOperator::new(random_psd(5, 3, seed).view()).unwrap();
            let mut prev = -1.0;
            for t in [0.0, 0.1, 0.5, 2.0, 10.0, 100.0] {
                let va = variance_allocation(op.eigenvalues(), t, 1.0).unwrap();
                prop_assert!(va.explained_proportion >= prev);
                prev = va.explained_proportion;
            }
        }
    }
}
