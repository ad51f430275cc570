//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use gfreml_core::reml::{self, RemlStatus, DEFAULT_REL_TOL};
use gfreml_core::vctest::{self, pvalue_monte_carlo, pvalue_weighted_chisq, DEFAULT_PVALUE_TOL};
use gfreml_core::{FlowModel, MlpNetwork, SpectralOperator};
use gfreml_harness::experiments::{linear_gd_flow_deviation, InitialOutput};
use gfreml_harness::{
    run_earlystop_experiment, run_test_experiment, EarlyStopConfig, Execution, ScenarioName,
    TestExperimentConfig,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let b = Array2::from_shape_simple_fn((n, rank), || randn(rng));
    b.dot(&b.t())
}

/// Coefficients loading on the upper part of a decaying spectrum.
fn reml_instance(n: usize, rng: &mut ChaCha8Rng) -> (Array1<f64>, Array1<f64>) {
    let mut l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(3) * 10.0).collect();
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c: Vec<f64> = l.iter().map(|&v| (v.sqrt() + 0.3) * randn(rng)).collect();
    (Array1::from(c), Array1::from(l))
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=30);
        let rank = rng.random_range(1..=n);
        let op = SpectralOperator::new(random_psd(n, rank, &mut rng).view()).unwrap();
        let f0 = Array1::from_shape_simple_fn(n, || randn(&mut rng));
        let y = Array1::from_shape_simple_fn(n, || randn(&mut rng));
        let lbar = op.mean_eigenvalue();
        let m = FlowModel::build(op, f0.clone(), y.view(), None, None).unwrap();
        for s in [0.01, 0.1, 1.0, 10.0] {
            let t = s / lbar;
            let lhs = &f0 + &m.blup(t).unwrap();
            let fit = m.fit_in_sample(t).unwrap();
            for (a, b) in lhs.iter().zip(&fit) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("max |f0 + u_t - f_t| = {worst:.2e} (< 1e-10)"))
}

/// `Q(t)` evaluated directly with its own max shift, independent of the library.
/// `log_c2` holds `ln c_k^2`.
fn q_direct(log_c2: &[f64], l: &[f64], lsum: f64, t: f64) -> f64 {
    let m = log_c2.iter().zip(l).map(|(a, lk)| a - t * lk).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = log_c2.iter().zip(l).map(|(a, lk)| (a - t * lk - m).exp()).sum();
    log_c2.len() as f64 * (m + s.ln()) + t * lsum
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_t, mut worst_psi, mut min_q2) = (0.0f64, 0.0f64, f64::INFINITY);
    let mut interior = 0;
    for _ in 0..50 {
        let (c, l) = reml_instance(50, &mut rng);
        let fit = reml::solve_stopping_time(c.view(), l.view(), DEFAULT_REL_TOL).unwrap();
        if fit.status != RemlStatus::InteriorRoot {
            continue;
        }
        interior += 1;
        let (cs, ls) = (c.as_slice().unwrap(), l.as_slice().unwrap());
        let log_c2: Vec<f64> = cs.iter().map(|v| (v * v).ln()).collect();
        let lsum = l.sum();
        let lbar = lsum / 50.0;
        let (lo, hi) = ((1e-4 / lbar).ln(), (1e4 / lbar).ln());
        let points = 1_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..points {
            let t = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
            let q = q_direct(&log_c2, ls, lsum, t);
            if q < best.0 {
                best = (q, t);
            }
        }
        worst_t = worst_t.max((fit.t_hat - best.1).abs() / fit.t_hat);
        let s0: f64 = cs.iter().zip(ls).map(|(ck, lk)| ck * ck * (-fit.t_hat * lk).exp()).sum();
        worst_psi = worst_psi.max((fit.psi_at_t_hat * 50.0 / s0).abs());
        for i in 0..100 {
            let t = (lo + (hi - lo) * i as f64 / 99.0).exp();
            min_q2 = min_q2.min(reml::q_derivatives(c.view(), l.view(), t).unwrap().1);
        }
    }
    outcome(
        interior == 50 && worst_t < 1e-4 && worst_psi < 1e-8 && min_q2 >= 0.0,
        format!(
            "{interior}/50 interior, max rel |t - t_grid| = {worst_t:.2e} (< 1e-4), \
             max |psi| n / S0 = {worst_psi:.2e} (< 1e-8), min Q'' = {min_q2:.2e} (>= 0)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let c = Array1::from(vec![2.0, 1.0]);
    let l = Array1::from(vec![2.0, 0.0]);
    let fit = reml::solve_stopping_time(c.view(), l.view(), DEFAULT_REL_TOL).unwrap();
    let dt = (fit.t_hat - std::f64::consts::LN_2).abs();
    let ds = (fit.sigma2_hat - 1.0).abs();
    outcome(
        dt < 1e-10 && ds < 1e-12,
        format!("t_hat = {:.15}, |t_hat - ln 2| = {dt:.2e} (< 1e-10), |sigma2_hat - 1| = {ds:.2e} (< 1e-12)", fit.t_hat),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let smoke = TestExperimentConfig::new(ScenarioName::TestNull, vec![200], 200, 40_000);
    let smoke_rate = run_test_experiment(&smoke, Execution::Parallel).unwrap().results[0].rejection_rate;
    let smoke_secs = start.elapsed().as_secs_f64();

    let full = TestExperimentConfig::new(ScenarioName::TestNull, vec![200], 1000, 4_000);
    let r = run_test_experiment(&full, Execution::Parallel).unwrap();
    let rate = r.results[0].rejection_rate;
    let pass = (0.03..=0.07).contains(&rate) && (0.01..=0.10).contains(&smoke_rate) && smoke_secs < 180.0;
    outcome(
        pass,
        format!(
            "type I error {rate:.3} over 1000 reps (band [0.03, 0.07]); smoke {smoke_rate:.3} over 200 reps \
             (band [0.01, 0.10]) in {smoke_secs:.1} s (< 180 s)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = TestExperimentConfig::new(ScenarioName::TestAlt, vec![500], 200, 5_000);
    let r = run_test_experiment(&cfg, Execution::Parallel).unwrap();
    let power = r.results[0].rejection_rate;
    outcome(power >= 0.95, format!("power {power:.3} over 200 reps at n = 500 (>= 0.95)"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst = (0.0, 0.0, 0.0);
    let mut all = true;
    for i in 0..20 {
        let m = 2 + i % 5;
        let w: Vec<f64> = (0..m)
            .map(|k| {
                let mag = 10f64.powf(rng.random_range(-3.0..3.0));
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * mag
            })
            .collect();
        let p = pvalue_weighted_chisq(&w, DEFAULT_PVALUE_TOL).unwrap();
        let mc = pvalue_monte_carlo(&w, 10_000_000, 6_000 + i as u64).unwrap();
        let diff = (p.p - mc.p).abs();
        let bound = 1e-3f64.max(3.0 * mc.err);
        all &= diff < bound;
        if diff - bound > worst_excess {
            worst_excess = diff - bound;
            worst = (diff, bound, p.p);
        }
    }
    outcome(
        all,
        format!(
            "20 weight vectors; tightest: |p_imhof - p_mc| = {:.2e} vs bound {:.2e} (p = {:.4})",
            worst.0, worst.1, worst.2
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (n, d, reps) = (100, 10, 2000);
    let mut p: Vec<f64> = (0..reps)
        .map(|_| {
            let x = Array2::from_shape_simple_fn((n, d), || randn(&mut rng));
            let f0 = Array1::from_shape_simple_fn(n, || randn(&mut rng));
            let y = Array1::from_shape_simple_fn(n, || 0.5 * randn(&mut rng));
            let h = x.dot(&x.t());
            vctest::score_test(y.view(), f0.view(), h.view()).unwrap().p_value
        })
        .collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / reps as f64 - v).max(v - i as f64 / reps as f64))
        .fold(0.0, f64::max);
    outcome(ks < 0.05, format!("KS distance {ks:.4} over {reps} null p-values (< 0.05)"))
}

fn criterion_8() -> Outcome {
    let cfg = EarlyStopConfig::new(ScenarioName::Case1, 20, 8_000);
    assert_eq!(cfg.initial_output, InitialOutput::Subtracted);
    let r = run_earlystop_experiment(&cfg, Execution::Parallel).unwrap();
    let ratio = r.aggregates.mean_risk_ratio;
    let worst = r.records.iter().map(|x| x.risk_ratio).fold(0.0, f64::max);
    outcome(
        ratio <= 1.10,
        format!(
            "mean oracle risk ratio {ratio:.4} over 20 reps (<= 1.10), worst {worst:.4}; \
             mean test MSE REML {:.4}, validation {:.4}, trajectory minimum {:.4}",
            r.aggregates.mean_test_mse_at_reml_stop,
            r.aggregates.mean_test_mse_validation_stop.unwrap_or(f64::NAN),
            r.aggregates.mean_test_mse_oracle_min
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let x = Array2::from_shape_simple_fn((20, 4), || 0.4 * randn(&mut rng));
    let y = Array1::from_shape_simple_fn(20, || randn(&mut rng));
    let d1 = linear_gd_flow_deviation(x.view(), y.view(), 1e-2, 1.0, 9).unwrap();
    let d2 = linear_gd_flow_deviation(x.view(), y.view(), 5e-3, 1.0, 9).unwrap();
    let ratio = d1 / d2;
    outcome(
        (1.6..=2.4).contains(&ratio),
        format!("deviation {d1:.3e} at eta = 1e-2, {d2:.3e} at eta = 5e-3, ratio {ratio:.3} (in [1.6, 2.4])"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let depth = 1 + (k as usize % 3);
        let mut widths = vec![rng.random_range(2..6)];
        widths.extend((0..depth).map(|_| rng.random_range(3..9)));
        widths.push(1);
        let net = MlpNetwork::<f64>::init(&widths, 77 + k).unwrap();
        let x = Array1::from_shape_simple_fn(widths[0], || randn(&mut rng));
        let g = net.grad_params(x.view()).unwrap();
        let p0 = net.params_flat();
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut probe = net.clone();
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            probe.set_params_flat(p.view()).unwrap();
            let up = probe.forward_one(x.view()).unwrap();
            p[i] -= 2.0 * h;
            probe.set_params_flat(p.view()).unwrap();
            let down = probe.forward_one(x.view()).unwrap();
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-3 * scale);
            worst = worst.max(rel);
        }
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 10 networks (< 1e-5)"))
}

fn criterion_11() -> Outcome {
    let mut cfg = TestExperimentConfig::new(ScenarioName::TestAlt, vec![40, 60], 12, 1_100);
    cfg.width = 64;
    let serial = serde_json::to_string_pretty(&run_test_experiment(&cfg, Execution::Serial).unwrap()).unwrap();
    let parallel = serde_json::to_string_pretty(&run_test_experiment(&cfg, Execution::Parallel).unwrap()).unwrap();
    let library = serial == parallel;

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        "scenario = \"test_alt\"\nn_grid = [40, 60]\nreps = 12\nbase_seed = 1100\nwidth = 64\n",
    )
    .unwrap();
    let run = |name: &str, threads: &str, serial: bool| {
        let out = dir.path().join(name);
        let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_gfreml"));
        cmd.env("GFREML_THREADS", threads)
            .arg("simulate")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out);
        if serial {
            cmd.arg("--serial");
        }
        let status = cmd.status().unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.json", "1", true);
    let b = run("b.json", "4", false);
    let c = run("c.json", "4", false);
    let binary = a == b && b == c;
    let matches_library = a == format!("{serial}\n").into_bytes();
    outcome(
        library && binary && matches_library,
        format!(
            "serial == parallel in library: {library}; binary runs byte-identical: {binary}; \
             binary == library: {matches_library}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("BLUP equivalence", criterion_1),
        ("REML solver vs grid oracle", criterion_2),
        ("closed-form REML case", criterion_3),
        ("score-test calibration", criterion_4),
        ("score-test power", criterion_5),
        ("exact p-value vs Monte Carlo", criterion_6),
        ("null p-value uniformity", criterion_7),
        ("prediction optimality proxy", criterion_8),
        ("GD-flow consistency", criterion_9),
        ("gradient correctness", criterion_10),
        ("determinism", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {:>2}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(&format!(" {f}")) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{id} [{name}]: {verdict} ({:.1} s) {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
