//! Training curves on a time grid, written as CSV with a JSON sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gfreml_core::reml::{self, RemlFit, RemlStatus};
use gfreml_core::FlowModel;
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSidecar {
    pub t_hat: f64,
    pub sigma2_hat: f64,
    pub edf: f64,
    pub q_value: f64,
    pub status: RemlStatus,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub n: usize,
    pub rank: usize,
    pub points: usize,
    pub csv: String,
}

/// Sidecar path: the CSV path with its extension replaced by `json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes one row per grid time with columns `t, train_mse, [test_mse,] esc,
/// edf, v_criterion` and the REML summary next to it.
pub fn emit_curves(
    model: &FlowModel<f64>,
    fit: &RemlFit<f64>,
    test: Option<(ArrayView2<f64>, ArrayView1<f64>)>,
    t_grid: &[f64],
    path: &Path,
) -> Result<PathBuf> {
    let io = |e| HarnessError::io(path, e);
    let lambdas = model.op().eigenvalues();
    let coeffs = model.coeffs();
    let esc = reml::esc_curve(coeffs, lambdas, t_grid)?;

    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let header = if test.is_some() {
        "t,train_mse,test_mse,esc,edf,v_criterion"
    } else {
        "t,train_mse,esc,edf,v_criterion"
    };
    writeln!(out, "{header}").map_err(io)?;
    for (&t, &psi) in t_grid.iter().zip(esc.iter()) {
        let train = model.train_mse(t)?;
        write!(out, "{t},{train}").map_err(io)?;
        if let Some((x, y)) = test {
            let pred = model.predict_many(x, t)?;
            let n = y.len().max(1) as f64;
            let mse: f64 = pred.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum::<f64>() / n;
            write!(out, ",{mse}").map_err(io)?;
        }
        let edf = reml::edf(lambdas, t)?;
        let v = reml::v_criterion(coeffs, lambdas, t)?;
        writeln!(out, ",{psi},{edf},{v}").map_err(io)?;
    }
    out.flush().map_err(io)?;

    let sidecar = CurveSidecar {
        t_hat: fit.t_hat,
        sigma2_hat: fit.sigma2_hat,
        edf: fit.edf,
        q_value: fit.q_value,
        status: fit.status,
        condition_i: fit.condition_i,
        condition_ii: fit.condition_ii,
        n: model.n(),
        rank: model.op().rank(),
        points: t_grid.len(),
        csv: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    std::fs::write(&side, json).map_err(|e| HarnessError::io(&side, e))?;
    Ok(side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gfreml_core::reml::{solve_stopping_time, DEFAULT_REL_TOL};
    use gfreml_core::SpectralOperator;
    use ndarray::{Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> (FlowModel<f64>, RemlFit<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20;
        let x = Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0));
        let g = gfreml_core::kernels::gram_rbf(x.view(), 1.0).unwrap();
        let op = SpectralOperator::new(g.h.view()).unwrap();
        let y: Array1<f64> = x.column(0).mapv(|v: f64| (2.0 * v).sin()) + &Array1::from_shape_simple_fn(n, || 0.3 * rng.random_range(-1.0..1.0));
        let m = FlowModel::build(op, Array1::zeros(n), y.view(), None, None).unwrap();
        let fit = solve_stopping_time(m.coeffs(), m.op().eigenvalues(), DEFAULT_REL_TOL).unwrap();
        (m, fit)
    }

    #[test]
    fn three_point_grid() {
        let (m, fit) = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let side = emit_curves(&m, &fit, None, &[0.1, 1.0, 10.0], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "t,train_mse,esc,edf,v_criterion");
        let parsed: CurveSidecar = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
        assert_eq!(parsed.t_hat, fit.t_hat);
        assert_eq!(parsed.points, 3);
    }

    #[test]
    fn esc_changes_sign_once() {
        let (m, fit) = model();
        assert_eq!(fit.status, RemlStatus::InteriorRoot);
        let grid = crate::oracle::log_grid(fit.t_hat * 1e-3, fit.t_hat * 1e3, 60);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        emit_curves(&m, &fit, None, &grid, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let esc: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        let changes = esc.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn unwritable_path_reports_path() {
        let (m, fit) = model();
        let err = emit_curves(&m, &fit, None, &[1.0], Path::new("/nonexistent/dir/c.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/c.csv"));
    }
}
