//! Dense feed-forward network trained with mini-batch momentum gradient
//! descent on squared loss.
//!
//! Inputs are standardized internally; weights start from a seeded uniform
//! draw scaled by fan-in. Hidden layers use the configured activation, the
//! output layer is linear. With no hidden layers the model is plain linear
//! regression, which gives the training loop an exact reference point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Feed-forward network over a flat parameter vector. Per layer the vector
/// holds the weight block (outputs x inputs, row-major) followed by the
/// biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl Network {
    pub fn init(dims: Vec<usize>, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut params = Vec::with_capacity(Self::count_params(&dims));
        for l in 0..dims.len() - 1 {
            let fan_in = dims[l];
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..dims[l + 1] * fan_in {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat_n(0.0, dims[l + 1]));
        }
        Self {
            dims,
            activation,
            params,
        }
    }

    fn count_params(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn param_count(&self) -> usize {
        Self::count_params(&self.dims)
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.dims
            .windows(2)
            .take(layer)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Forward pass returning per-layer pre-activations and activations
    /// (activations[0] is the input).
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n_layers = self.dims.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut act = Vec::with_capacity(n_layers + 1);
        act.push(x.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let offset = self.layer_offset(l);
            let input = &act[l];
            let mut z = vec![0.0; n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let w = &self.params[offset + o * n_in..offset + (o + 1) * n_in];
                let b = self.params[offset + n_out * n_in + o];
                *zo = b + w.iter().zip(input).map(|(a, v)| a * v).sum::<f64>();
            }
            let a = if l + 1 == n_layers {
                z.clone() // linear output layer
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let (_, act) = self.forward_trace(x);
        act.last().unwrap()[0]
    }

    /// Squared loss `1/(2m) Σ (f(x) - y)²` over the given rows.
    pub fn loss(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> f64 {
        let m = rows.len() as f64;
        rows.iter()
            .map(|&r| {
                let e = self.forward(x.row(r)) - y[r];
                e * e
            })
            .sum::<f64>()
            / (2.0 * m)
    }

    /// Loss and its analytic gradient with respect to the flat parameter
    /// vector, over the given rows.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let m = rows.len() as f64;
        let n_layers = self.dims.len() - 1;
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;

        for &r in rows {
            let (pre, act) = self.forward_trace(x.row(r));
            let error = act[n_layers][0] - y[r];
            loss += error * error / (2.0 * m);

            // delta for the linear output layer
            let mut delta = vec![error / m];
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let offset = self.layer_offset(l);
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        for (i, &a) in act[l].iter().enumerate() {
                            grad[offset + o * n_in + i] += d * a;
                        }
                        grad[offset + n_out * n_in + o] += d;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; n_in];
                    for (i, p) in prev.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for (o, d) in delta.iter().enumerate() {
                            s += self.params[offset + o * n_in + i] * d;
                        }
                        *p = s * self.activation.derivative(pre[l - 1][i]);
                    }
                    delta = prev;
                }
            }
        }
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
    pub feature_means: Vec<f64>,
    pub feature_sds: Vec<f64>,
    pub final_loss: f64,
    pub input_dim: usize,
}

impl MlpModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let standardized: Vec<f64> = x
            .iter()
            .zip(self.feature_means.iter().zip(&self.feature_sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        self.network.forward(&standardized)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn fit_mlp(
    x: &Matrix,
    y: &[f64],
    hidden: &[usize],
    activation: Activation,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    momentum: f64,
    seed: u64,
) -> Result<MlpModel> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    assert!(
        (0.0..1.0).contains(&momentum),
        "momentum must be in [0, 1)"
    );
    let n = x.rows();
    let d = x.cols();
    assert!(n >= 1, "need at least one training row");

    // standardize inputs; constant columns become no-ops
    let mut means = vec![0.0; d];
    let mut sds = vec![1.0; d];
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        means[j] = mean;
        if sd > 0.0 {
            sds[j] = sd;
        }
    }
    let x_std = {
        let rows: Vec<Vec<f64>> = x
            .row_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| (v - means[j]) / sds[j])
                    .collect()
            })
            .collect();
        Matrix::from_rows(&rows)
    };

    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(d);
    dims.extend_from_slice(hidden);
    dims.push(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut network = Network::init(dims, activation, &mut rng);
    let mut velocity = vec![0.0; network.param_count()];
    let all_rows: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..epochs {
        // seeded in-place shuffle
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(batch_size) {
            let (_, grad) = network.loss_and_grad(&x_std, y, batch);
            for ((p, v), g) in network.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = momentum * *v - learning_rate * g;
                *p += *v;
            }
        }
        let epoch_loss = network.loss(&x_std, y, &all_rows);
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence);
        }
    }

    let final_loss = network.loss(&x_std, y, &all_rows);
    Ok(MlpModel {
        network,
        feature_means: means,
        feature_sds: sds,
        final_loss,
        input_dim: d,
    })
}
