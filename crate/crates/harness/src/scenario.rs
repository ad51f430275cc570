//! Simulation designs: standard normal features, a fixed ground-truth
//! function and Gaussian noise.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    TestNull,
    TestAlt,
    Case1,
    Case2,
    Case3,
}

impl ScenarioName {
    /// Ground truth `f*(x)`; reads the first ten coordinates.
    pub fn f_star(self, x: ArrayView1<f64>) -> f64 {
        match self {
            ScenarioName::TestNull => 0.0,
            ScenarioName::TestAlt | ScenarioName::Case2 => {
                0.25 * x[0]
                    + 0.15 * x[1] * x[1]
                    + 0.1 * x[2] * x[3]
                    + 0.2 * x[4].sin()
                    + 0.15 * x[5].cos() * x[6].sin()
                    + 0.05 * x[7] * x[8] * x[9]
            }
            ScenarioName::Case1 => {
                0.1 * x[0]
                    + 0.16 * x[1].tanh()
                    + 0.2 * x[2].sin()
                    + 0.12 * x[3]
                    + 0.06 * x[4] * x[4]
                    + 0.01 * x[5].exp()
                    + 0.2 * x[6].cos()
                    + 0.1 * x[7].abs()
                    + 0.08 * x[8]
                    + 0.14 * x[9].sin()
            }
            ScenarioName::Case3 => {
                let x345 = x[2] * x[3] * x[4];
                let inner = (x[0] * x[1] + x345).sin()
                    + x345.sin()
                    + 2.0 * (x[5].sin() * x[6].sin() + x[7].sin() * x[8].sin() * x[9].sin());
                2.0 * inner.cos()
            }
        }
    }

    pub fn min_dim(self) -> usize {
        match self {
            ScenarioName::TestNull => 1,
            _ => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: ScenarioName,
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    10
}

fn default_noise_sd() -> f64 {
    0.5
}

impl SimScenario {
    pub fn new(name: ScenarioName, n_train: usize, n_test: usize) -> Self {
        Self {
            name,
            n_train,
            n_test,
            d: default_dim(),
            noise_sd: default_noise_sd(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return Err(HarnessError::Config(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        if self.d < self.name.min_dim() {
            return Err(HarnessError::Config(format!(
                "scenario {:?} needs d >= {}, got {}",
                self.name,
                self.name.min_dim(),
                self.d
            )));
        }
        if self.n_train == 0 {
            return Err(HarnessError::Config("n_train must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub f_train: Array1<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Array1<f64>,
    pub f_test: Array1<f64>,
}

/// Draws training features, training noise, test features and test noise, in
/// that order, from one ChaCha8 stream seeded by `seed`.
pub fn generate(scenario: &SimScenario, seed: u64) -> Result<Dataset> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x_train, f_train, y_train) = draw(scenario, scenario.n_train, &mut rng);
    let (x_test, f_test, y_test) = draw(scenario, scenario.n_test, &mut rng);
    Ok(Dataset {
        x_train,
        y_train,
        f_train,
        x_test,
        y_test,
        f_test,
    })
}

fn draw(
    s: &SimScenario,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let x = Array2::from_shape_simple_fn((n, s.d), || rng.sample(StandardNormal));
    let f: Array1<f64> = x.rows().into_iter().map(|r| s.name.f_star(r)).collect();
    let y = f.mapv(|v| v + s.noise_sd * rng.sample::<f64, _>(StandardNormal));
    (x, f, y)
}

/// Seed for the network of replication `seed`, on a separate ChaCha8 stream
/// from the data.
pub fn network_seed(seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng.random()
}
