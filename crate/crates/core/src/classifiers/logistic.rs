//! L2-regularized logistic regression, one-vs-rest for more than two classes,
//! fitted by damped Newton iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Penalty `l2_strength / 2 * ||w||^2`; the intercept is not penalized.
    pub l2_strength: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2_strength: 1.0,
            max_iterations: 100,
            tolerance: 1e-8,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_strength >= 0.0) || self.max_iterations == 0 {
            return Err(Error::invalid("logistic: l2_strength >= 0 and max_iterations >= 1"));
        }
        Ok(())
    }
}

/// One weight vector per class (a single one for two classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    binary: bool,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, cfg: &LogisticConfig) -> Result<Self> {
        let binary = n_classes == 2;
        let targets: Vec<usize> = if binary { vec![1] } else { (0..n_classes).collect() };
        let mut weights = Vec::with_capacity(targets.len());
        let mut biases = Vec::with_capacity(targets.len());
        for t in targets {
            let pos: Vec<bool> = y.iter().map(|&c| c == t).collect();
            let (w, b) = fit_binary(x, &pos, cfg);
            weights.push(w);
            biases.push(b);
        }
        Ok(LogisticModel {
            weights,
            biases,
            binary,
        })
    }

    /// Per-class probabilities `1 / (1 + e^{-(w.x + b)})`.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        if self.binary {
            let p = sigmoid(dot(&self.weights[0], row) + self.biases[0]);
            vec![1.0 - p, p]
        } else {
            self.weights
                .iter()
                .zip(&self.biases)
                .map(|(w, b)| sigmoid(dot(w, row) + b))
                .collect()
        }
    }
}

fn objective(x: &Matrix, pos: &[bool], w: &[f64], b: f64, l2: f64) -> f64 {
    let mut loss = 0.0;
    for (row, &p) in x.iter_rows().zip(pos) {
        let z = dot(w, row) + b;
        loss += if p { softplus(-z) } else { softplus(z) };
    }
    loss + 0.5 * l2 * dot(w, w)
}

fn fit_binary(x: &Matrix, pos: &[bool], cfg: &LogisticConfig) -> (Vec<f64>, f64) {
    let d = x.cols();
    let p = d + 1;
    let l2 = cfg.l2_strength;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut f = objective(x, pos, &w, b, l2);

    for _ in 0..cfg.max_iterations {
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for (row, &t) in x.iter_rows().zip(pos) {
            let mu = sigmoid(dot(&w, row) + b);
            let r = mu - if t { 1.0 } else { 0.0 };
            let s = (mu * (1.0 - mu)).max(1e-12);
            for j in 0..d {
                grad[j] += r * row[j];
                let sj = s * row[j];
                for k in 0..=j {
                    hess[j * p + k] += sj * row[k];
                }
                hess[d * p + j] += sj;
            }
            grad[d] += r;
            hess[d * p + d] += s;
        }
        for j in 0..d {
            grad[j] += l2 * w[j];
            hess[j * p + j] += l2;
        }
        // Tiny ridge keeps separable or rank-deficient problems solvable.
        for j in 0..p {
            hess[j * p + j] += 1e-10;
            for k in 0..j {
                hess[k * p + j] = hess[j * p + k];
            }
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < cfg.tolerance {
            break;
        }
        let Some(step) = cholesky_solve(&hess, &grad, p) else {
            break;
        };

        let mut t = 1.0;
        let slope: f64 = -dot(&grad, &step);
        let mut accepted = false;
        for _ in 0..40 {
            let wn: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi - t * si).collect();
            let bn = b - t * step[d];
            let fnew = objective(x, pos, &wn, bn, l2);
            if fnew <= f + 1e-4 * t * slope {
                let moved = step.iter().fold(0.0f64, |m, s| m.max((t * s).abs()));
                w = wn;
                b = bn;
                f = fnew;
                accepted = moved > cfg.tolerance;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (w, b)
}
