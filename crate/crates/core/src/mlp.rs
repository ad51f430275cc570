//! Finite-width fully connected ReLU network with hand-written forward and
//! backward passes.
//!
//! Layer `l` maps `a_{l-1}` to `z_l = W_l a_{l-1} + b_l`; hidden layers apply
//! ReLU, the scalar output layer is linear. Parameters are flattened layer by
//! layer, each layer as its weight matrix in row-major `(out, in)` order
//! followed by its bias vector (omitted for bias-free networks).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Train MSE growth factor over the initial value that aborts training.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `(out, in)`.
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork<T> {
    widths: Vec<usize>,
    layers: Vec<Layer<T>>,
    use_bias: bool,
    seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Keep the training-set predictions of every epoch.
    pub record_predictions: bool,
}

#[derive(Debug, Clone)]
pub struct TrainTrace<T> {
    pub epochs: usize,
    pub learning_rate: T,
    /// `||y - f(X)||^2 / n` after each epoch; entry 0 is the initial network.
    pub train_mse: Vec<T>,
    /// Same for the test set; empty when no test data was supplied.
    pub test_mse: Vec<T>,
    /// Row `k` holds the training predictions after epoch `k`.
    pub checkpoints: Option<Array2<T>>,
}

/// Per-layer activations and backpropagated output sensitivities for a batch.
///
/// The parameter gradient of the output at example `i` for layer `l` is
/// `deltas[l][i] (outer) acts[l][i]` (plus `deltas[l][i]` for the bias), so
/// gradient inner products factor layer by layer.
#[derive(Debug, Clone)]
pub struct NtkFeatures<T> {
    acts: Vec<Array2<T>>,
    deltas: Vec<Array2<T>>,
    use_bias: bool,
}

struct ForwardCache<T> {
    /// Input to each layer, `(n, in_l)`.
    inputs: Vec<Array2<T>>,
    /// Preactivation of each layer, `(n, out_l)`.
    preacts: Vec<Array2<T>>,
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

fn relu_gate<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidWidths(
            "need at least an input and an output width".into(),
        ));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidWidths("widths must be positive".into()));
    }
    if *widths.last().unwrap() != 1 {
        return Err(Error::InvalidWidths("output width must be 1".into()));
    }
    Ok(())
}

impl<T: Real> MlpNetwork<T> {
    /// He-normal weights (`std = sqrt(2 / fan_in)`) and zero biases,
    /// deterministic in `seed`.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        Self::init_with_bias(widths, seed, true)
    }

    pub fn init_bias_free(widths: &[usize], seed: u64) -> Result<Self> {
        Self::init_with_bias(widths, seed, false)
    }

    fn init_with_bias(widths: &[usize], seed: u64, use_bias: bool) -> Result<Self> {
        validate_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (2.0 / fan_in as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(z * std)
                });
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            use_bias,
            seed,
        })
    }

    /// Network with explicit layer parameters. Biases of a bias-free network
    /// must be zero.
    pub fn from_layers(layers: Vec<Layer<T>>, use_bias: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidWidths("no layers".into()));
        }
        let mut widths = vec![layers[0].weights.ncols()];
        for layer in &layers {
            check_len("layer input width", *widths.last().unwrap(), layer.weights.ncols())?;
            check_len("bias length", layer.weights.nrows(), layer.bias.len())?;
            if !use_bias && layer.bias.iter().any(|&b| b != T::zero()) {
                return Err(Error::InvalidParameter(
                    "bias-free network with nonzero bias".into(),
                ));
            }
            widths.push(layer.weights.nrows());
        }
        validate_widths(&widths)?;
        Ok(Self {
            widths,
            layers,
            use_bias,
            seed: 0,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + if self.use_bias { l.bias.len() } else { 0 })
            .sum()
    }

    pub fn params_flat(&self) -> Array1<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            if self.use_bias {
                out.extend(l.bias.iter().copied());
            }
        }
        Array1::from(out)
    }

    pub fn set_params_flat(&mut self, p: ArrayView1<T>) -> Result<()> {
        check_len("parameter vector", self.num_params(), p.len())?;
        let mut it = p.iter().copied();
        let use_bias = self.use_bias;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().unwrap();
            }
            if use_bias {
                for b in l.bias.iter_mut() {
                    *b = it.next().unwrap();
                }
            }
        }
        Ok(())
    }

    /// Multiplies every weight matrix (not the biases) by `c`.
    pub fn scale_weights(&mut self, c: T) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|w| w * c);
        }
    }

    fn forward_cached(&self, x: ArrayView2<T>) -> Result<(Array1<T>, ForwardCache<T>)> {
        check_len("input width", self.input_dim(), x.ncols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            if self.use_bias {
                z += &layer.bias.view().insert_axis(Axis(0));
            }
            let next = if l == last {
                z.clone()
            } else {
                z.mapv(relu)
            };
            inputs.push(a);
            preacts.push(z);
            a = next;
        }
        let out = a.column(0).to_owned();
        Ok((out, ForwardCache { inputs, preacts }))
    }

    /// Outputs `f(x_i)` for every row of `x`.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_one(&self, x: ArrayView1<T>) -> Result<T> {
        Ok(self.forward(x.insert_axis(Axis(0)))?[0])
    }

    /// Backpropagates per-example output sensitivities `d f / d z_l`.
    fn sensitivities(&self, cache: &ForwardCache<T>) -> Vec<Array2<T>> {
        let n = cache.inputs[0].nrows();
        let nl = self.layers.len();
        let mut deltas = vec![Array2::zeros((0, 0)); nl];
        let mut pending = Some(Array2::ones((n, 1)));
        for l in (0..nl).rev() {
            let d = pending.take().expect("sensitivity for layer");
            if l > 0 {
                let mut g = d.dot(&self.layers[l].weights);
                Zip::from(&mut g)
                    .and(&cache.preacts[l - 1])
                    .for_each(|g, &z| *g *= relu_gate(z));
                pending = Some(g);
            }
            deltas[l] = d;
        }
        deltas
    }

    /// Gradient of the scalar output at `x` with respect to all parameters, in
    /// the flattening order documented at module level.
    pub fn grad_params(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let (_, cache) = self.forward_cached(x.insert_axis(Axis(0)))?;
        let deltas = self.sensitivities(&cache);
        let mut out = Vec::with_capacity(self.num_params());
        for (l, delta) in deltas.iter().enumerate() {
            let a = cache.inputs[l].row(0);
            for &d in delta.row(0) {
                out.extend(a.iter().map(|&ai| d * ai));
            }
            if self.use_bias {
                out.extend(delta.row(0).iter().copied());
            }
        }
        Ok(Array1::from(out))
    }

    pub fn ntk_features(&self, x: ArrayView2<T>) -> Result<NtkFeatures<T>> {
        let (_, cache) = self.forward_cached(x)?;
        let deltas = self.sensitivities(&cache);
        Ok(NtkFeatures {
            acts: cache.inputs,
            deltas,
            use_bias: self.use_bias,
        })
    }

    /// Full-batch gradient descent on `L = 0.5 ||y - f(X)||^2`, mutating the
    /// network in place.
    pub fn train_full_batch(
        &mut self,
        x: ArrayView2<T>,
        y: ArrayView1<T>,
        learning_rate: T,
        epochs: usize,
        test: Option<(ArrayView2<T>, ArrayView1<T>)>,
        options: &TrainOptions,
    ) -> Result<TrainTrace<T>> {
        let evals: Vec<_> = test.into_iter().collect();
        let (mut trace, mut curves) =
            self.train_full_batch_multi(x, y, learning_rate, epochs, &evals, options)?;
        if let Some(c) = curves.pop() {
            trace.test_mse = c;
        }
        Ok(trace)
    }

    /// Like [`train_full_batch`](Self::train_full_batch) but tracks the MSE on
    /// several held-out sets, returned in order alongside the trace (whose
    /// `test_mse` is left empty).
    pub fn train_full_batch_multi(
        &mut self,
        x: ArrayView2<T>,
        y: ArrayView1<T>,
        learning_rate: T,
        epochs: usize,
        evals: &[(ArrayView2<T>, ArrayView1<T>)],
        options: &TrainOptions,
    ) -> Result<(TrainTrace<T>, Vec<Vec<T>>)> {
        if !(learning_rate > T::zero()) || !learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let n = x.nrows();
        check_len("response", n, y.len())?;
        if n == 0 {
            return Err(Error::TooFewSamples { n, min: 1 });
        }
        for (xt, yt) in evals {
            check_len("test response", xt.nrows(), yt.len())?;
            check_len("test input width", self.input_dim(), xt.ncols())?;
        }
        let mse = |f: &Array1<T>, y: ArrayView1<T>| -> T {
            let m = T::from_usize_lossy(y.len().max(1));
            f.iter().zip(y.iter()).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / m
        };

        let mut train_mse = Vec::with_capacity(epochs + 1);
        let mut eval_mse = vec![Vec::with_capacity(epochs + 1); evals.len()];
        let mut checkpoints = options
            .record_predictions
            .then(|| Array2::zeros((epochs + 1, n)));
        let limit = T::lit(DIVERGENCE_FACTOR);
        let last = self.layers.len() - 1;

        for epoch in 0..=epochs {
            let (f, cache) = self.forward_cached(x)?;
            let m = mse(&f, y);
            if !m.is_finite() || (epoch > 0 && train_mse[0] > T::zero() && m > limit * train_mse[0]) {
                return Err(Error::Diverged {
                    epoch,
                    mse: m.as_f64(),
                });
            }
            train_mse.push(m);
            for ((xt, yt), curve) in evals.iter().zip(eval_mse.iter_mut()) {
                curve.push(mse(&self.forward(*xt)?, *yt));
            }
            if let Some(cp) = checkpoints.as_mut() {
                cp.row_mut(epoch).assign(&f);
            }
            if epoch == epochs {
                break;
            }

            // dL/df = f - y, then backpropagate through the batch.
            let mut g: Array2<T> = (&f - &y).insert_axis(Axis(1));
            for l in (0..=last).rev() {
                let grad_w = g.t().dot(&cache.inputs[l]);
                let grad_b = g.sum_axis(Axis(0));
                let next = if l > 0 {
                    let mut gp = g.dot(&self.layers[l].weights);
                    Zip::from(&mut gp)
                        .and(&cache.preacts[l - 1])
                        .for_each(|g, &z| *g *= relu_gate(z));
                    Some(gp)
                } else {
                    None
                };
                let layer = &mut self.layers[l];
                layer.weights.scaled_add(-learning_rate, &grad_w);
                if self.use_bias {
                    layer.bias.scaled_add(-learning_rate, &grad_b);
                }
                if let Some(gp) = next {
                    g = gp;
                }
            }
        }

        let trace = TrainTrace {
            epochs,
            learning_rate,
            train_mse,
            test_mse: Vec::new(),
            checkpoints,
        };
        Ok((trace, eval_mse))
    }
}

impl<T: Real> NtkFeatures<T> {
    pub fn n(&self) -> usize {
        self.acts[0].nrows()
    }

    /// Empirical NTK Gram matrix `J J^T`, assembled layer by layer as
    /// `sum_l (D_l D_l^T) * (A_l A_l^T + bias)` and symmetrized exactly.
    pub fn gram(&self) -> Array2<T> {
        let n = self.n();
        let mut h = Array2::zeros((n, n));
        let bias = if self.use_bias { T::one() } else { T::zero() };
        for (a, d) in self.acts.iter().zip(&self.deltas) {
            let dd = d.dot(&d.t());
            let aa = a.dot(&a.t());
            Zip::from(&mut h)
                .and(&dd)
                .and(&aa)
                .for_each(|h, &x, &y| *h += x * (y + bias));
        }
        let half = T::lit(0.5);
        let ht = h.t().to_owned();
        Zip::from(&mut h).and(&ht).for_each(|a, &b| *a = half * (*a + b));
        h
    }

    /// Gradient inner products between the first example of `other` and every
    /// example of `self`.
    pub fn cross(&self, other: &NtkFeatures<T>) -> Result<Array1<T>> {
        check_len("layer count", self.acts.len(), other.acts.len())?;
        let n = self.n();
        let bias = if self.use_bias { T::one() } else { T::zero() };
        let mut out = Array1::zeros(n);
        for l in 0..self.acts.len() {
            let dx = self.deltas[l].dot(&other.deltas[l].row(0));
            let ax = self.acts[l].dot(&other.acts[l].row(0));
            Zip::from(&mut out)
                .and(&dx)
                .and(&ax)
                .for_each(|o, &d, &a| *o += d * (a + bias));
        }
        Ok(out)
    }
}
