//! Command-line front end.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gfreml_core::flow::{variance_allocation, InitFn};
use gfreml_core::reml::{self, RemlFit, DEFAULT_REL_TOL};
use gfreml_core::vctest::{self, PValueMethod};
use gfreml_core::{kernels, FlowModel, GramResult, MlpNetwork, SpectralOperator};
use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::curves::emit_curves;
use crate::data::read_csv;
use crate::error::{HarnessError, Result};
use crate::experiments::{
    init_fn, run_earlystop_experiment, run_test_experiment, EarlyStopConfig, Execution,
    TestExperimentConfig,
};
use crate::oracle::log_grid;

#[derive(Debug, Parser)]
#[command(name = "gfreml", version, about = "Gradient-flow REML stopping times and score tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// REML stopping time and diagnostics on a data set.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        rel_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score test for training-induced signal.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Early-stopping experiment from a TOML config.
    Stop {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        serial: bool,
    },
    /// Score-test simulation from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        serial: bool,
    },
    /// Training curves on a log-spaced time grid.
    Curves {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        tmin: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Held-out CSV for a test_mse column.
        #[arg(long)]
        test_data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Linear,
    Rbf,
    NtkAnalytic,
    NtkEmpirical,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with a header row, feature columns, then the response column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub kernel: KernelKind,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    /// Hidden layers of the analytic or empirical NTK.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Hidden width of the network behind the empirical NTK.
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    /// Network initialization seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

struct Operator {
    gram: GramResult<f64>,
    f0_train: Array1<f64>,
    f0_fn: InitFn<f64>,
}

/// Gram matrix and initial predictions. Only the empirical NTK comes with a
/// network, so the other kernels start from `f0 = 0`.
fn build_operator(args: &DataArgs, x: ArrayView2<f64>) -> Result<Operator> {
    let zero = || -> InitFn<f64> { Arc::new(|_| Ok(0.0)) };
    Ok(match args.kernel {
        KernelKind::Linear => Operator {
            gram: kernels::gram_linear(x)?,
            f0_train: Array1::zeros(x.nrows()),
            f0_fn: zero(),
        },
        KernelKind::Rbf => Operator {
            gram: kernels::gram_rbf(x, args.bandwidth)?,
            f0_train: Array1::zeros(x.nrows()),
            f0_fn: zero(),
        },
        KernelKind::NtkAnalytic => Operator {
            gram: kernels::gram_ntk_analytic(x, args.depth)?,
            f0_train: Array1::zeros(x.nrows()),
            f0_fn: zero(),
        },
        KernelKind::NtkEmpirical => {
            let mut widths = vec![x.ncols()];
            widths.extend(std::iter::repeat_n(args.width, args.depth));
            widths.push(1);
            let net = Arc::new(MlpNetwork::<f64>::init(&widths, args.seed)?);
            Operator {
                gram: kernels::gram_ntk_empirical(x, net.clone())?,
                f0_train: net.forward(x)?,
                f0_fn: init_fn(net),
            }
        }
    })
}

fn load_model(args: &DataArgs) -> Result<(FlowModel<f64>, usize)> {
    let table = read_csv(&args.data)?;
    let op = build_operator(args, table.x.view())?;
    let spectral = SpectralOperator::new(op.gram.h.view())?;
    let cross = op.gram.cross_fn();
    let model = FlowModel::build(spectral, op.f0_train, table.y.view(), Some(cross), Some(op.f0_fn))?;
    Ok((model, table.x.ncols()))
}

#[derive(Debug, Serialize)]
struct FitReport {
    kernel: KernelKind,
    n: usize,
    d: usize,
    rank: usize,
    mean_eigenvalue: f64,
    top_eigenvalue: f64,
    reml: RemlFit<f64>,
    train_mse_at_t_hat: f64,
    explained_proportion_at_t_hat: f64,
}

#[derive(Debug, Serialize)]
struct TestReport {
    kernel: KernelKind,
    n: usize,
    statistic: f64,
    p_value: f64,
    method: PValueMethod,
    integration_error: f64,
    centering_fallback: bool,
    top_projected_eigenvalue: f64,
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, rel_tol, out } => {
            let (model, d) = load_model(&data)?;
            let lambdas = model.op().eigenvalues();
            let fit = reml::solve_stopping_time(model.coeffs(), lambdas, rel_tol)?;
            let va = variance_allocation(lambdas, fit.t_hat, 1.0)?;
            let report = FitReport {
                kernel: data.kernel,
                n: model.n(),
                d,
                rank: model.op().rank(),
                mean_eigenvalue: model.op().mean_eigenvalue(),
                top_eigenvalue: lambdas[0],
                train_mse_at_t_hat: model.train_mse(fit.t_hat)?,
                explained_proportion_at_t_hat: va.explained_proportion,
                reml: fit,
            };
            write_json(&report, out.as_deref())
        }
        Command::Test { data, out } => {
            let table = read_csv(&data.data)?;
            let op = build_operator(&data, table.x.view())?;
            let res = vctest::score_test(table.y.view(), op.f0_train.view(), op.gram.h.view())?;
            let report = TestReport {
                kernel: data.kernel,
                n: table.y.len(),
                statistic: res.statistic,
                p_value: res.p_value,
                method: res.method,
                integration_error: res.integration_error,
                centering_fallback: res.centering_fallback,
                top_projected_eigenvalue: res.projected_eigenvalues[0],
            };
            write_json(&report, out.as_deref())
        }
        Command::Stop { config, out, serial } => {
            let cfg: EarlyStopConfig = read_config(&config)?;
            let report = run_earlystop_experiment(&cfg, execution(serial))?;
            write_json(&report, out.as_deref())
        }
        Command::Simulate { config, out, serial } => {
            let cfg: TestExperimentConfig = read_config(&config)?;
            let report = run_test_experiment(&cfg, execution(serial))?;
            write_json(&report, out.as_deref())
        }
        Command::Curves {
            data,
            tmin,
            tmax,
            points,
            test_data,
            out,
        } => {
            if !(tmin > 0.0 && tmax >= tmin && tmax.is_finite()) || points == 0 {
                return Err(HarnessError::Config(
                    "need 0 < tmin <= tmax and at least one point".into(),
                ));
            }
            let (model, d) = load_model(&data)?;
            let fit = reml::solve_stopping_time(model.coeffs(), model.op().eigenvalues(), DEFAULT_REL_TOL)?;
            let test = test_data.as_deref().map(read_csv).transpose()?;
            if let Some(t) = &test {
                if t.x.ncols() != d {
                    return Err(HarnessError::Data {
                        path: test_data.clone().unwrap_or_default(),
                        message: format!("expected {d} feature columns, found {}", t.x.ncols()),
                    });
                }
            }
            let test_views: Option<(ArrayView2<f64>, ArrayView1<f64>)> =
                test.as_ref().map(|t| (t.x.view(), t.y.view()));
            let grid = log_grid(tmin, tmax, points);
            emit_curves(&model, &fit, test_views, &grid, &out)?;
            Ok(())
        }
    }
}
