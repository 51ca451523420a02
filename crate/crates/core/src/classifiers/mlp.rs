//! Single-hidden-layer perceptron: rectified-linear hidden units, softmax
//! output, cross-entropy loss with L2 penalty, trained by mini-batch Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// What the hidden-layer multiplier is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthBasis {
    /// Feature count before categorical encoding.
    SourceFeatures,
    /// Encoded column count.
    EncodedColumns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_multiplier: usize,
    pub width_basis: WidthBasis,
    /// Epoch cap.
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub batch_size: usize,
    /// Stop once the epoch loss fails to improve by this much for
    /// `n_iter_no_change` consecutive epochs.
    pub tolerance: f64,
    pub n_iter_no_change: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: 1,
            hidden_multiplier: 3,
            width_basis: WidthBasis::SourceFeatures,
            max_iterations: 200,
            learning_rate: 1e-3,
            alpha: 1e-4,
            batch_size: 32,
            tolerance: 1e-4,
            n_iter_no_change: 10,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers != 1 {
            return Err(Error::invalid("mlp: exactly one hidden layer is supported"));
        }
        if self.hidden_multiplier == 0 || self.max_iterations == 0 || self.batch_size == 0 {
            return Err(Error::invalid(
                "mlp: hidden_multiplier, max_iterations and batch_size must be >= 1",
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::invalid("mlp: learning_rate > 0 and alpha >= 0"));
        }
        Ok(())
    }
}

/// Weights stored flat as `[W1 (h x d), b1 (h), W2 (m x h), b2 (m)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

impl MlpNetwork {
    pub fn param_count(inputs: usize, hidden: usize, outputs: usize) -> usize {
        hidden * inputs + hidden + outputs * hidden + outputs
    }

    /// Glorot-uniform initialization.
    pub fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(Self::param_count(inputs, hidden, outputs));
        let b1 = (6.0 / (inputs + hidden) as f64).sqrt();
        for _ in 0..hidden * inputs + hidden {
            params.push(rng.random_range(-b1..b1));
        }
        let b2 = (6.0 / (hidden + outputs) as f64).sqrt();
        for _ in 0..outputs * hidden + outputs {
            params.push(rng.random_range(-b2..b2));
        }
        MlpNetwork {
            inputs,
            hidden,
            outputs,
            params,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.inputs;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.outputs * self.hidden;
        (w1, b1, w2)
    }

    fn hidden_activations(&self, row: &[f64], out: &mut [f64]) {
        let (o_b1, _, _) = self.offsets();
        for (k, a) in out.iter_mut().enumerate() {
            let w = &self.params[k * self.inputs..(k + 1) * self.inputs];
            let z = self.params[o_b1 + k] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            *a = z.max(0.0);
        }
    }

    fn output_logits(&self, hidden: &[f64], out: &mut [f64]) {
        let (_, o_w2, o_b2) = self.offsets();
        for (c, z) in out.iter_mut().enumerate() {
            let w = &self.params[o_w2 + c * self.hidden..o_w2 + (c + 1) * self.hidden];
            *z = self.params[o_b2 + c] + w.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Output-layer pre-activations; their argmax is the predicted class.
    pub fn forward(&self, row: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden];
        self.hidden_activations(row, &mut h);
        let mut z = vec![0.0; self.outputs];
        self.output_logits(&h, &mut z);
        z
    }

    /// Mean cross-entropy plus `alpha / (2 n) * ||W||^2` over the rows in
    /// `idx`, and its gradient with respect to `params`.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[usize], idx: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut h = vec![0.0; self.hidden];
        let mut z = vec![0.0; self.outputs];
        let mut dh = vec![0.0; self.hidden];
        let mut loss = 0.0;

        for &i in idx {
            let row = x.row(i);
            self.hidden_activations(row, &mut h);
            self.output_logits(&h, &mut z);
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
            let log_denom = denom.ln() + zmax;
            loss += log_denom - z[y[i]];

            dh.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..self.outputs {
                let p = (z[c] - log_denom).exp();
                let dz = p - if c == y[i] { 1.0 } else { 0.0 };
                let w2 = o_w2 + c * self.hidden;
                for k in 0..self.hidden {
                    grad[w2 + k] += dz * h[k];
                    dh[k] += dz * self.params[w2 + k];
                }
                grad[o_b2 + c] += dz;
            }
            for k in 0..self.hidden {
                if h[k] <= 0.0 {
                    continue;
                }
                let w1 = k * self.inputs;
                for (j, v) in row.iter().enumerate() {
                    grad[w1 + j] += dh[k] * v;
                }
                grad[o_b1 + k] += dh[k];
            }
        }

        let n = idx.len() as f64;
        let mut penalty = 0.0;
        for (p, g) in self.params.iter().zip(grad.iter_mut()).take(o_b1) {
            penalty += p * p;
            *g = *g / n + alpha * p / n;
        }
        for g in grad[o_b1..o_w2].iter_mut() {
            *g /= n;
        }
        for (p, g) in self.params[o_w2..o_b2].iter().zip(grad[o_w2..o_b2].iter_mut()) {
            penalty += p * p;
            *g = *g / n + alpha * p / n;
        }
        for g in grad[o_b2..].iter_mut() {
            *g /= n;
        }
        (loss / n + 0.5 * alpha * penalty / n, grad)
    }

    pub(crate) fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        hidden: usize,
        cfg: &MlpConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut net = MlpNetwork::init(x.cols(), hidden.max(1), n_classes, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_5546_464c_45);
        let n = x.rows();
        let batch = cfg.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();

        let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let mut m = vec![0.0; net.params.len()];
        let mut v = vec![0.0; net.params.len()];
        let mut t = 0i32;
        let mut best_loss = f64::INFINITY;
        let mut stale = 0;

        for _ in 0..cfg.max_iterations {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let (loss, grad) = net.loss_and_gradient(x, y, chunk, cfg.alpha);
                epoch_loss += loss * chunk.len() as f64;
                t += 1;
                let lr = cfg.learning_rate * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
                for ((p, g), (mi, vi)) in net.params.iter_mut().zip(&grad).zip(m.iter_mut().zip(v.iter_mut())) {
                    *mi = beta1 * *mi + (1.0 - beta1) * g;
                    *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                    *p -= lr * *mi / (vi.sqrt() + eps);
                }
            }
            epoch_loss /= n as f64;
            if epoch_loss > best_loss - cfg.tolerance {
                stale += 1;
            } else {
                stale = 0;
            }
            best_loss = best_loss.min(epoch_loss);
            if stale >= cfg.n_iter_no_change {
                break;
            }
        }
        Ok(net)
    }
}
