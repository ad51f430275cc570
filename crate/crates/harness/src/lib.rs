//! Simulation experiments, oracle risks and the `gfreml` command-line tool
//! built on `gfreml-core`.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod curves;
pub mod data;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod scenario;

pub use error::{HarnessError, Result};
pub use experiments::{
    run_earlystop_experiment, run_test_experiment, EarlyStopConfig, EarlyStopReport, Execution,
    TestExperimentConfig, TestExperimentReport,
};
pub use oracle::OracleRisk;
pub use scenario::{generate, Dataset, ScenarioName, SimScenario};
