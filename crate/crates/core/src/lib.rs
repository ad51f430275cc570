//! Fixed-operator squared-error gradient flow and its random-effects dual.
//!
//! A training operator `H` (any symmetric positive semidefinite Gram matrix)
//! drives the prediction dynamics `df/dt = -H (f - y)`. This crate solves the
//! flow in closed form in the eigenbasis of `H`, evaluates the equivalent
//! best linear unbiased predictor, estimates the stopping time by restricted
//! maximum likelihood, and tests for training-induced signal with a
//! variance-component score test whose p-value is computed exactly.
//!
//! All numerical modules are generic over [`Real`]; the `*64` aliases at the
//! crate root fix the scalar to `f64`, which is what the tolerances in the
//! test suites are calibrated for.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod flow;
pub mod kernels;
pub mod mlp;
pub mod reml;
pub mod scalar;
pub mod spectral;
pub mod vctest;

pub use error::{Error, Result};
pub use flow::{FlowModel, VarianceAllocation};
pub use kernels::{CrossFn, GramResult, KernelSpec};
pub use mlp::{MlpNetwork, TrainOptions, TrainTrace};
pub use reml::{RemlFit, RemlStatus};
pub use scalar::Real;
pub use spectral::SpectralOperator;
pub use vctest::{PValue, PValueMethod, ScoreTestResult};

pub type SpectralOperator64 = SpectralOperator<f64>;
pub type FlowModel64 = FlowModel<f64>;
pub type GramResult64 = GramResult<f64>;
pub type MlpNetwork64 = MlpNetwork<f64>;
pub type TrainTrace64 = TrainTrace<f64>;
pub type RemlFit64 = RemlFit<f64>;
pub type ScoreTestResult64 = ScoreTestResult<f64>;
pub type VarianceAllocation64 = VarianceAllocation<f64>;

pub type SpectralOperator32 = SpectralOperator<f32>;
pub type FlowModel32 = FlowModel<f32>;
