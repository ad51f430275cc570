//! End-to-end runs of the `gfreml` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gfreml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfreml")).args(args).output().unwrap()
}

fn write_csv(path: &Path, rows: &[[f64; 3]]) {
    let mut text = String::from("x1,x2,y\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
    }
    std::fs::write(path, text).unwrap();
}

fn smooth_rows(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let a = (i as f64 * 0.37).sin();
            let b = (i as f64 * 0.91).cos();
            [a, b, 2.0 * a - b + 0.3 * (i as f64 * 2.3).sin()]
        })
        .collect()
}

#[test]
fn fit_writes_reml_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_csv(&data, &smooth_rows(40));
    let out = gfreml(&["fit", "--data", data.to_str().unwrap(), "--kernel", "rbf", "--bandwidth", "0.7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 40);
    assert_eq!(v["kernel"], "rbf");
    assert!(v["reml"]["t_hat"].as_f64().unwrap() >= 0.0);
    assert!(v["reml"]["status"].is_string());
}

#[test]
fn test_subcommand_reports_pvalue() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out_path = dir.path().join("r.json");
    write_csv(&data, &smooth_rows(30));
    let out = gfreml(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--kernel",
        "ntk-empirical",
        "--width",
        "32",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn curves_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out_path = dir.path().join("curves.csv");
    write_csv(&data, &smooth_rows(25));
    let out = gfreml(&[
        "curves",
        "--data",
        data.to_str().unwrap(),
        "--kernel",
        "linear",
        "--tmin",
        "0.001",
        "--tmax",
        "10",
        "--points",
        "7",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("t,train_mse,esc,edf,v_criterion"));
    assert!(dir.path().join("curves.json").exists());
}

#[test]
fn missing_input_exits_with_code_2() {
    let out = gfreml(&["fit", "--data", "/nonexistent/d.csv", "--kernel", "linear"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/d.csv"));
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "scenario = \"test_null\"\nunknown_key = 1\n").unwrap();
    let out = gfreml(&["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unbracketed_root_exits_with_code_3() {
    // Response in the span of the two leading eigenvectors, both above the
    // mean eigenvalue: the REML objective keeps decreasing in t.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_csv(&data, &[[2.0, 0.0, 1.0], [0.0, 1.9, 1.0], [0.0, 0.0, 0.0]]);
    let out = gfreml(&["fit", "--data", data.to_str().unwrap(), "--kernel", "linear"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
