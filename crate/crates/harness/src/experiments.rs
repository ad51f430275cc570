//! Replicated simulation experiments: score-test calibration and power, and
//! REML-guided early stopping of a trained network.
//!
//! Replication `r` uses seed `base_seed + r` for its data and a derived seed
//! for its network. Replications run as a parallel map and are collected in
//! replication order, so reports do not depend on the thread count.

use std::time::Instant;

use gfreml_core::flow::InitFn;
use gfreml_core::mlp::TrainOptions;
use gfreml_core::reml::{self, RemlStatus, DEFAULT_REL_TOL};
use gfreml_core::vctest::{self, PValueMethod, DEFAULT_PVALUE_TOL};
use gfreml_core::{kernels, FlowModel, MlpNetwork, SpectralOperator};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{HarnessError, Result};
use crate::oracle::{log_grid, OracleRisk};
use crate::scenario::{generate, network_seed, ScenarioName, SimScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

fn run_reps<R, F>(reps: usize, execution: Execution, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    match execution {
        Execution::Serial => (0..reps).map(f).collect(),
        Execution::Parallel => (0..reps).into_par_iter().map(f).collect(),
    }
}

fn rep_seed(base_seed: u64, rep: usize) -> u64 {
    base_seed.wrapping_add(rep as u64)
}

fn widths(d: usize, width: usize, hidden_layers: usize) -> Vec<usize> {
    let mut w = vec![d];
    w.extend(std::iter::repeat_n(width, hidden_layers));
    w.push(1);
    w
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

// ---------------------------------------------------------------------------
// Score test experiment

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestExperimentConfig {
    pub scenario: ScenarioName,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_test_width")]
    pub width: usize,
    #[serde(default = "default_one")]
    pub hidden_layers: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_pvalue_tol")]
    pub pvalue_tol: f64,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_test_width() -> usize {
    500
}
fn default_one() -> usize {
    1
}
fn default_dim() -> usize {
    10
}
fn default_noise_sd() -> f64 {
    0.5
}
fn default_pvalue_tol() -> f64 {
    DEFAULT_PVALUE_TOL
}

impl TestExperimentConfig {
    pub fn new(scenario: ScenarioName, n_grid: Vec<usize>, reps: usize, base_seed: u64) -> Self {
        Self {
            scenario,
            n_grid,
            reps,
            alpha: default_alpha(),
            base_seed,
            width: default_test_width(),
            hidden_layers: 1,
            d: default_dim(),
            noise_sd: default_noise_sd(),
            pvalue_tol: default_pvalue_tol(),
            record_wall_time: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(HarnessError::Config("reps must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 3) {
            return Err(HarnessError::Config("n_grid entries must be at least 3".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HarnessError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.width == 0 {
            return Err(HarnessError::Config("width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub rep: usize,
    pub seed: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub method: PValueMethod,
    pub centering_fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestGridResult {
    pub n: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Binomial standard error of the rejection rate.
    pub rejection_se: f64,
    pub records: Vec<TestRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestExperimentReport {
    pub config: TestExperimentConfig,
    pub results: Vec<TestGridResult>,
}

/// One score test on freshly generated data with the empirical NTK of a
/// freshly initialized network.
pub fn score_test_replication(cfg: &TestExperimentConfig, n: usize, rep: usize) -> Result<TestRecord> {
    let start = Instant::now();
    let seed = rep_seed(cfg.base_seed, rep);
    let scenario = SimScenario {
        name: cfg.scenario,
        n_train: n,
        n_test: 0,
        d: cfg.d,
        noise_sd: cfg.noise_sd,
        seed,
    };
    let data = generate(&scenario, seed)?;
    let net = MlpNetwork::<f64>::init(&widths(cfg.d, cfg.width, cfg.hidden_layers), network_seed(seed))?;
    let f0 = net.forward(data.x_train.view())?;
    let h = net.ntk_features(data.x_train.view())?.gram();
    let res = vctest::score_test_with_tol(data.y_train.view(), f0.view(), h.view(), cfg.pvalue_tol)?;
    Ok(TestRecord {
        rep,
        seed,
        statistic: res.statistic,
        p_value: res.p_value,
        reject: res.p_value < cfg.alpha,
        method: res.method,
        centering_fallback: res.centering_fallback,
        wall_time_s: cfg.record_wall_time.then(|| start.elapsed().as_secs_f64()),
    })
}

pub fn run_test_experiment(cfg: &TestExperimentConfig, execution: Execution) -> Result<TestExperimentReport> {
    cfg.validate()?;
    let mut results = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let records = run_reps(cfg.reps, execution, |rep| score_test_replication(cfg, n, rep))?;
        let rejections = records.iter().filter(|r| r.reject).count();
        let rate = rejections as f64 / records.len() as f64;
        results.push(TestGridResult {
            n,
            rejections,
            rejection_rate: rate,
            rejection_se: (rate * (1.0 - rate) / records.len() as f64).sqrt(),
            records,
        });
    }
    Ok(TestExperimentReport {
        config: cfg.clone(),
        results,
    })
}

// ---------------------------------------------------------------------------
// Early stopping experiment

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningRateKeyword {
    /// `1 / lambda_1` of the empirical NTK at initialization.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate {
    Fixed(f64),
    Keyword(LearningRateKeyword),
}

/// How the network output at initialization enters the trained predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialOutput {
    /// Predict with `f(x; theta)`, so `f0` is the random initial output.
    Network,
    /// Predict with `f(x; theta) - f(x; theta_0)`, so `f0 = 0` while the
    /// tangent kernel is unchanged. Equivalent to training on `y + f(X; theta_0)`.
    Subtracted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopConfig {
    pub scenario: ScenarioName,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_train")]
    pub n_test: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_stop_width")]
    pub width: usize,
    #[serde(default = "default_stop_depth")]
    pub hidden_layers: usize,
    #[serde(default = "default_initial_output")]
    pub initial_output: InitialOutput,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: LearningRate,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_stop_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_risk_grid_points")]
    pub risk_grid_points: usize,
    #[serde(default = "default_esc_points")]
    pub esc_points: usize,
    #[serde(default = "default_true")]
    pub validation: bool,
    /// Evaluate the flow's out-of-sample predictions at the REML time.
    #[serde(default = "default_true")]
    pub flow_predictions: bool,
    /// Replace `n_train`, `n_test` and `width` by 1000.
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_n_train() -> usize {
    500
}
fn default_stop_width() -> usize {
    256
}
fn default_stop_depth() -> usize {
    2
}
fn default_initial_output() -> InitialOutput {
    InitialOutput::Subtracted
}
fn default_learning_rate() -> LearningRate {
    LearningRate::Keyword(LearningRateKeyword::Auto)
}
fn default_epochs() -> usize {
    200
}
fn default_stop_reps() -> usize {
    20
}
fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}
fn default_risk_grid_points() -> usize {
    2000
}
fn default_esc_points() -> usize {
    25
}
fn default_true() -> bool {
    true
}

impl EarlyStopConfig {
    pub fn new(scenario: ScenarioName, reps: usize, base_seed: u64) -> Self {
        Self {
            scenario,
            n_train: default_n_train(),
            n_test: default_n_train(),
            d: default_dim(),
            noise_sd: default_noise_sd(),
            width: default_stop_width(),
            hidden_layers: default_stop_depth(),
            initial_output: default_initial_output(),
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            reps,
            base_seed,
            rel_tol: default_rel_tol(),
            risk_grid_points: default_risk_grid_points(),
            esc_points: default_esc_points(),
            validation: true,
            flow_predictions: true,
            paper_scale: false,
            record_wall_time: false,
        }
    }

    /// Configuration with `paper_scale` applied.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        if c.paper_scale {
            c.n_train = 1000;
            c.n_test = 1000;
            c.width = 1000;
        }
        c
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(HarnessError::Config("reps must be at least 1".into()));
        }
        if self.n_train < 3 {
            return Err(HarnessError::Config("n_train must be at least 3".into()));
        }
        if self.width == 0 {
            return Err(HarnessError::Config("width must be positive".into()));
        }
        if let LearningRate::Fixed(lr) = self.learning_rate {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(HarnessError::Config(format!("learning_rate must be positive, got {lr}")));
            }
        }
        if !(self.rel_tol > 0.0) {
            return Err(HarnessError::Config("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyStopRecord {
    pub rep: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub t_hat: f64,
    pub reml_status: RemlStatus,
    pub sigma2_hat: f64,
    /// `edf(t_hat)` in continuous time.
    pub edf_continuous: f64,
    /// `edf(eta * stopping_epoch)`.
    pub edf_discrete: f64,
    /// `round(t_hat / eta)`, clamped to the trained horizon.
    pub stopping_epoch: usize,
    /// The unclamped stopping epoch lies beyond `epochs`.
    pub beyond_horizon: bool,
    pub oracle_risk_at_t_hat: f64,
    pub oracle_min_risk: f64,
    pub oracle_t_opt: f64,
    /// `oracle_risk_at_t_hat / oracle_min_risk`.
    pub risk_ratio: f64,
    pub test_mse_initial: f64,
    pub test_mse_at_reml_stop: f64,
    /// Minimum test MSE along the GD trajectory and the epoch attaining it.
    pub test_mse_oracle_min: f64,
    pub oracle_epoch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_mse_validation_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow_test_mse_at_t_hat: Option<f64>,
    /// `(t, psi(t))` samples on a log grid around `t_hat`.
    pub esc: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyStopAggregates {
    pub reps: usize,
    pub mean_risk_ratio: f64,
    pub mean_t_hat: f64,
    pub mean_edf_continuous: f64,
    pub mean_test_mse_at_reml_stop: f64,
    pub mean_test_mse_oracle_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_test_mse_validation_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_flow_test_mse_at_t_hat: Option<f64>,
    pub beyond_horizon_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyStopReport {
    pub config: EarlyStopConfig,
    pub records: Vec<EarlyStopRecord>,
    pub aggregates: EarlyStopAggregates,
}

fn argmin(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b })
}

/// Network predictions at initialization as an [`InitFn`].
pub fn init_fn(net: Arc<MlpNetwork<f64>>) -> InitFn<f64> {
    Arc::new(move |x: ArrayView1<f64>| net.forward_one(x))
}

pub fn early_stop_replication(cfg: &EarlyStopConfig, rep: usize) -> Result<EarlyStopRecord> {
    let start = Instant::now();
    let seed = rep_seed(cfg.base_seed, rep);
    let scenario = SimScenario {
        name: cfg.scenario,
        n_train: cfg.n_train,
        n_test: cfg.n_test,
        d: cfg.d,
        noise_sd: cfg.noise_sd,
        seed,
    };
    let data = generate(&scenario, seed)?;
    let net_seed = network_seed(seed);
    let net = Arc::new(MlpNetwork::<f64>::init(
        &widths(cfg.d, cfg.width, cfg.hidden_layers),
        net_seed,
    )?);

    let gram = kernels::gram_ntk_empirical(data.x_train.view(), net.clone())?;
    let op = SpectralOperator::new(gram.h.view())?;
    let net_train = net.forward(data.x_train.view())?;
    let net_test = net.forward(data.x_test.view())?;
    // Under `Subtracted` the network is fit to targets shifted by its own
    // initial output, and held-out targets are shifted the same way.
    let (f0, f0_fn, y_train, y_test) = match cfg.initial_output {
        InitialOutput::Network => (
            net_train.clone(),
            init_fn(net.clone()),
            data.y_train.clone(),
            data.y_test.clone(),
        ),
        InitialOutput::Subtracted => {
            let zero: InitFn<f64> = Arc::new(|_| Ok(0.0));
            (
                Array1::zeros(cfg.n_train),
                zero,
                &data.y_train + &net_train,
                &data.y_test + &net_test,
            )
        }
    };
    let model = FlowModel::build(
        op.clone(),
        f0.clone(),
        data.y_train.view(),
        Some(gram.cross_fn()),
        Some(f0_fn),
    )?;
    let lambdas = op.eigenvalues();
    let fit = reml::solve_stopping_time(model.coeffs(), lambdas, cfg.rel_tol)?;

    let eta = match cfg.learning_rate {
        LearningRate::Fixed(v) => v,
        LearningRate::Keyword(LearningRateKeyword::Auto) => 1.0 / lambdas[0],
    };
    let raw_epoch = (fit.t_hat / eta).round();
    let beyond_horizon = raw_epoch > cfg.epochs as f64;
    let stopping_epoch = if beyond_horizon { cfg.epochs } else { raw_epoch as usize };

    let sigma2 = cfg.noise_sd * cfg.noise_sd;
    let oracle = OracleRisk::new(&op, data.f_train.view(), f0.view(), sigma2)?;
    let (oracle_t_opt, oracle_min_risk) = oracle.minimize_on_grid(&oracle.default_grid(cfg.risk_grid_points));
    let oracle_risk_at_t_hat = oracle.risk(fit.t_hat);

    let mut trained = (*net).clone();
    let trace = trained.train_full_batch(
        data.x_train.view(),
        y_train.view(),
        eta,
        cfg.epochs,
        Some((data.x_test.view(), y_test.view())),
        &TrainOptions::default(),
    )?;
    let test_curve = if trace.test_mse.is_empty() {
        vec![f64::NAN; cfg.epochs + 1]
    } else {
        trace.test_mse.clone()
    };
    let (oracle_epoch, test_mse_oracle_min) = argmin(&test_curve);

    let (validation_epoch, test_mse_validation_stop) = if cfg.validation {
        let (epoch, mse) = validation_stop(cfg, &data.x_train, &y_train, &data.x_test, &y_test, net_seed, eta)?;
        (Some(epoch), Some(mse))
    } else {
        (None, None)
    };

    let flow_test_mse_at_t_hat = if cfg.flow_predictions && cfg.n_test > 0 {
        let pred = model.predict_many(data.x_test.view(), fit.t_hat)?;
        Some(mse(pred.view(), data.y_test.view()))
    } else {
        None
    };

    let esc = esc_samples(&model, &op, fit.t_hat, cfg.esc_points)?;

    Ok(EarlyStopRecord {
        rep,
        seed,
        learning_rate: eta,
        t_hat: fit.t_hat,
        reml_status: fit.status,
        sigma2_hat: fit.sigma2_hat,
        edf_continuous: fit.edf,
        edf_discrete: reml::edf(lambdas, eta * stopping_epoch as f64)?,
        stopping_epoch,
        beyond_horizon,
        oracle_risk_at_t_hat,
        oracle_min_risk,
        oracle_t_opt,
        risk_ratio: oracle_risk_at_t_hat / oracle_min_risk,
        test_mse_initial: test_curve[0],
        test_mse_at_reml_stop: test_curve[stopping_epoch],
        test_mse_oracle_min,
        oracle_epoch,
        validation_epoch,
        test_mse_validation_stop,
        flow_test_mse_at_t_hat,
        esc,
        wall_time_s: cfg.record_wall_time.then(|| start.elapsed().as_secs_f64()),
    })
}

fn mse(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

fn esc_samples(model: &FlowModel<f64>, op: &SpectralOperator<f64>, t_hat: f64, points: usize) -> Result<Vec<[f64; 2]>> {
    let center = if t_hat > 0.0 { t_hat } else { 1.0 / op.mean_eigenvalue() };
    let grid = log_grid(center * 1e-2, center * 1e2, points);
    let esc = reml::esc_curve(model.coeffs(), op.eigenvalues(), &grid)?;
    Ok(grid.iter().zip(esc.iter()).map(|(&t, &p)| [t, p]).collect())
}

/// Trains on the first two thirds of the training rows, picks the epoch with
/// the smallest MSE on the last third, and returns it with the test MSE of
/// that network at that epoch.
fn validation_stop(
    cfg: &EarlyStopConfig,
    x: &Array2<f64>,
    y: &Array1<f64>,
    x_test: &Array2<f64>,
    y_test: &Array1<f64>,
    net_seed: u64,
    eta: f64,
) -> Result<(usize, f64)> {
    let n_fit = 2 * x.nrows() / 3;
    let mut net = MlpNetwork::<f64>::init(&widths(cfg.d, cfg.width, cfg.hidden_layers), net_seed)?;
    let evals = [
        (x.slice(s![n_fit.., ..]), y.slice(s![n_fit..])),
        (x_test.view(), y_test.view()),
    ];
    let (_, curves) = net.train_full_batch_multi(
        x.slice(s![..n_fit, ..]),
        y.slice(s![..n_fit]),
        eta,
        cfg.epochs,
        &evals,
        &TrainOptions::default(),
    )?;
    let (epoch, _) = argmin(&curves[0]);
    let test = curves[1].get(epoch).copied().unwrap_or(f64::NAN);
    Ok((epoch, test))
}

pub fn run_earlystop_experiment(cfg: &EarlyStopConfig, execution: Execution) -> Result<EarlyStopReport> {
    let cfg = cfg.effective();
    cfg.validate()?;
    let records = run_reps(cfg.reps, execution, |rep| early_stop_replication(&cfg, rep))?;
    let aggregates = EarlyStopAggregates {
        reps: records.len(),
        mean_risk_ratio: mean(records.iter().map(|r| r.risk_ratio)).unwrap_or(f64::NAN),
        mean_t_hat: mean(records.iter().map(|r| r.t_hat)).unwrap_or(f64::NAN),
        mean_edf_continuous: mean(records.iter().map(|r| r.edf_continuous)).unwrap_or(f64::NAN),
        mean_test_mse_at_reml_stop: mean(records.iter().map(|r| r.test_mse_at_reml_stop)).unwrap_or(f64::NAN),
        mean_test_mse_oracle_min: mean(records.iter().map(|r| r.test_mse_oracle_min)).unwrap_or(f64::NAN),
        mean_test_mse_validation_stop: mean(records.iter().filter_map(|r| r.test_mse_validation_stop)),
        mean_flow_test_mse_at_t_hat: mean(records.iter().filter_map(|r| r.flow_test_mse_at_t_hat)),
        beyond_horizon_count: records.iter().filter(|r| r.beyond_horizon).count(),
    };
    Ok(EarlyStopReport {
        config: cfg,
        records,
        aggregates,
    })
}

// ---------------------------------------------------------------------------
// Discrete gradient descent against the continuous flow

/// Largest deviation between full-batch GD on a linear model `f(x) = w'x + b`
/// and the closed-form flow at `t = k * eta`, over epochs with `k * eta <= horizon`.
///
/// For a linear model the NTK is `XX' + 1` and GD on the predictions is the
/// explicit Euler scheme of the flow, so the deviation is `O(eta)`.
pub fn linear_gd_flow_deviation(x: ArrayView2<f64>, y: ArrayView1<f64>, eta: f64, horizon: f64, seed: u64) -> Result<f64> {
    let mut net = MlpNetwork::<f64>::init(&[x.ncols(), 1], seed)?;
    let gram = kernels::gram_ntk_empirical(x, Arc::new(net.clone()))?;
    let op = SpectralOperator::new(gram.h.view())?;
    let f0 = net.forward(x)?;
    let model = FlowModel::build(op, f0, y, None, None)?;
    let epochs = (horizon / eta + 1e-9).floor() as usize;
    let trace = net.train_full_batch(x, y, eta, epochs, None, &TrainOptions { record_predictions: true })?;
    let checkpoints = trace.checkpoints.expect("predictions recorded");
    let mut worst: f64 = 0.0;
    for k in 0..=epochs {
        let flow = model.fit_in_sample(k as f64 * eta)?;
        for (a, b) in checkpoints.row(k).iter().zip(flow.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
