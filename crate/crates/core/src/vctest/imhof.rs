//! Upper-tail probability of a weighted sum of independent chi-square(1)
//! variables, `P(sum_k w_k z_k^2 >= 0)`.
//!
//! The characteristic function is inverted with the substitution `u = e^s`,
//! under which the inversion integral becomes
//! `p = 1/2 + (1/pi) int sin(theta(e^s)) / rho(e^s) ds`. The `s` range is cut
//! where the neglected tails are provably below half the tolerance and the
//! rest is integrated with adaptive Gauss-Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_PVALUE_TOL: f64 = 1e-6;
pub const DEFAULT_MC_SAMPLES: u64 = 10_000_000;
pub const DEFAULT_MC_SEED: u64 = 0x5eed_c0de;
const WEIGHT_DROP_REL: f64 = 1e-14;
const INITIAL_PANELS: usize = 32;
const MAX_PANELS: usize = 20_000;
const MC_BATCH: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Imhof,
    MonteCarlo,
    /// All retained weights share a sign, so the probability is exactly 0 or 1.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValue {
    pub p: f64,
    /// Quadrature error bound, or the binomial standard error for Monte Carlo.
    pub err: f64,
    pub method: PValueMethod,
}

/// Weights after dropping entries below `1e-14 * max|w|`.
fn retained(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter("non-finite chi-square weight".into()));
    }
    let top = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if top == 0.0 {
        return Err(Error::AllWeightsZero);
    }
    Ok(weights
        .iter()
        .copied()
        .filter(|w| w.abs() >= WEIGHT_DROP_REL * top)
        .collect())
}

/// `P(sum_k w_k z_k^2 >= 0)` by characteristic-function inversion, falling
/// back to [`DEFAULT_MC_SAMPLES`] Monte Carlo draws if quadrature fails.
pub fn pvalue_weighted_chisq(weights: &[f64], tol: f64) -> Result<PValue> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let w = retained(weights)?;
    if let Some(p) = sign_shortcut(&w) {
        return Ok(p);
    }
    match imhof(&w, tol) {
        Ok(p) => Ok(p),
        Err(Error::IntegrationFailure(_)) => {
            pvalue_monte_carlo(&w, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED)
        }
        Err(e) => Err(e),
    }
}

fn sign_shortcut(w: &[f64]) -> Option<PValue> {
    let exact = |p| PValue {
        p,
        err: 0.0,
        method: PValueMethod::Exact,
    };
    if w.iter().all(|&x| x >= 0.0) {
        Some(exact(1.0))
    } else if w.iter().all(|&x| x <= 0.0) {
        Some(exact(0.0))
    } else {
        None
    }
}

/// Characteristic-function inversion only; reports [`Error::IntegrationFailure`]
/// instead of falling back.
pub fn imhof(weights: &[f64], tol: f64) -> Result<PValue> {
    let w = retained(weights)?;
    if let Some(p) = sign_shortcut(&w) {
        return Ok(p);
    }
    let m = w.len() as f64;
    let abs_sum: f64 = w.iter().map(|x| x.abs()).sum();
    let log_abs_sum: f64 = w.iter().map(|x| x.abs().ln()).sum();
    // Near 0 the integrand is about (sum w / 2) e^s; beyond S it is bounded by
    // e^{-s m / 2} / prod|w|^{1/2}. Each cut tail contributes at most tol/4
    // to p after the 1/pi factor.
    let budget = 0.25 * tol * PI;
    let s_lo = (2.0 * budget / abs_sum).ln();
    let s_hi = (2.0 / m) * ((2.0 / m).ln() - 0.5 * log_abs_sum - budget.ln());
    if !(s_hi > s_lo) {
        return Err(Error::IntegrationFailure(format!(
            "empty integration range [{s_lo}, {s_hi}]"
        )));
    }
    let f = |s: f64| {
        let u = s.exp();
        let mut theta = 0.0;
        let mut log_rho = 0.0;
        for &wk in &w {
            let a = wk * u;
            theta += a.atan();
            log_rho += (a * a).ln_1p();
        }
        (0.5 * theta).sin() * (-0.25 * log_rho).exp()
    };
    let (integral, err) = adaptive_gk15(f, s_lo, s_hi, budget * 2.0)?;
    let p = 0.5 + integral / PI;
    let err = err / PI + 0.5 * tol;
    Ok(PValue {
        p: p.clamp(0.0, 1.0),
        err,
        method: PValueMethod::Imhof,
    })
}

/// Monte Carlo estimate of `P(sum w_k z_k^2 >= 0)`. Batches run in parallel,
/// each with its own ChaCha8 stream, so the result depends only on `seed`.
pub fn pvalue_monte_carlo(weights: &[f64], samples: u64, seed: u64) -> Result<PValue> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one Monte Carlo sample".into()));
    }
    let w = retained(weights)?;
    let batches = samples.div_ceil(MC_BATCH);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let len = MC_BATCH.min(samples - b * MC_BATCH);
            (0..len)
                .filter(|_| {
                    let q: f64 = w
                        .iter()
                        .map(|&wk| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            wk * z * z
                        })
                        .sum();
                    q >= 0.0
                })
                .count() as u64
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(PValue {
        p,
        err: (p * (1.0 - p) / samples as f64).sqrt(),
        method: PValueMethod::MonteCarlo,
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let sum = f(c - x) + f(c + x);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * h,
        err: ((kronrod - gauss) * h).abs(),
    }
}

/// Globally adaptive bisection on the panel with the largest error estimate.
fn adaptive_gk15(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::with_capacity(MAX_PANELS + 1);
    let width = (b - a) / INITIAL_PANELS as f64;
    for i in 0..INITIAL_PANELS {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { lo + width };
        heap.push(gk15(&f, lo, hi));
    }
    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        if total_err <= tol {
            let value = heap.iter().map(|p| p.value).sum();
            return Ok((value, total_err));
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::IntegrationFailure(format!(
                "error estimate {total_err:e} above {tol:e} after {MAX_PANELS} panels"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::IntegrationFailure("panel width underflow".into()));
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
    }
}
