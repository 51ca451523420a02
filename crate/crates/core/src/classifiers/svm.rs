//! Two-class C-SVM solved by sequential minimal optimization with
//! second-order working set selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / (columns * variance of all feature values)`.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub kernel: Kernel,
    pub penalty: f64,
    pub rbf_gamma: GammaRule,
    pub tolerance: f64,
    pub max_class_count: usize,
    pub max_point_count: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            kernel: Kernel::Rbf,
            penalty: 1.0,
            rbf_gamma: GammaRule::Scale,
            tolerance: 1e-3,
            max_class_count: 2,
            max_point_count: 10_000,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::invalid("svm: penalty and tolerance must be > 0"));
        }
        if let GammaRule::Value(g) = self.rbf_gamma {
            if !(g > 0.0) {
                return Err(Error::invalid("svm: rbf_gamma must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum KernelFn {
    Rbf(f64),
    Linear,
}

impl KernelFn {
    #[inline]
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelFn::Linear => dot(a, b),
            KernelFn::Rbf(g) => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-g * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    kernel: KernelFn,
    support: Matrix,
    /// `alpha_i * y_i` per support vector.
    coef: Vec<f64>,
    rho: f64,
}

/// Kernel rows, precomputed when the problem is small enough.
struct KernelRows<'a> {
    x: &'a Matrix,
    k: KernelFn,
    full: Option<Vec<f64>>,
    cache: Vec<Option<Vec<f64>>>,
    cached: usize,
    budget: usize,
}

const FULL_KERNEL_LIMIT: usize = 3000;

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, k: KernelFn) -> Self {
        let n = x.rows();
        let full = (n <= FULL_KERNEL_LIMIT).then(|| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v = k.eval(x.row(i), x.row(j));
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            m
        });
        KernelRows {
            x,
            k,
            full,
            cache: vec![None; n],
            cached: 0,
            budget: (64 << 20) / (8 * n.max(1)),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.x.rows();
        if self.full.is_some() {
            return &self.full.as_ref().expect("checked")[i * n..(i + 1) * n];
        }
        if self.cache[i].is_none() {
            if self.cached >= self.budget {
                self.cache.iter_mut().for_each(|c| *c = None);
                self.cached = 0;
            }
            let r = (0..n).map(|j| self.k.eval(self.x.row(i), self.x.row(j))).collect();
            self.cache[i] = Some(r);
            self.cached += 1;
        }
        self.cache[i].as_deref().expect("just filled")
    }

    fn diag(&self, i: usize) -> f64 {
        self.k.eval(self.x.row(i), self.x.row(i))
    }
}

const TAU: f64 = 1e-12;

impl SvmModel {
    /// `y` holds local labels 0/1; label 1 is the positive side.
    pub(crate) fn fit(x: &Matrix, y: &[usize], cfg: &SvmConfig) -> Result<Self> {
        let kernel = match cfg.kernel {
            Kernel::Linear => KernelFn::Linear,
            Kernel::Rbf => KernelFn::Rbf(match cfg.rbf_gamma {
                GammaRule::Value(g) => g,
                GammaRule::Scale => {
                    let v = x.as_slice();
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
                    if var > 0.0 {
                        1.0 / (x.cols() as f64 * var)
                    } else {
                        1.0
                    }
                }
            }),
        };

        let n = x.rows();
        let c = cfg.penalty;
        let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0; n];
        // Gradient of 0.5 a'Qa - e'a with Q_ij = y_i y_j K_ij.
        let mut grad = vec![-1.0; n];
        let mut rows = KernelRows::new(x, kernel);
        let qd: Vec<f64> = (0..n).map(|i| rows.diag(i)).collect();

        let is_up = |a: f64, yy: f64| (yy > 0.0 && a < c) || (yy < 0.0 && a > 0.0);
        let is_low = |a: f64, yy: f64| (yy > 0.0 && a > 0.0) || (yy < 0.0 && a < c);

        let max_iter = (100 * n).max(10_000_000);
        for _ in 0..max_iter {
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = usize::MAX;
            for t in 0..n {
                if is_up(alpha[t], ys[t]) {
                    let v = -ys[t] * grad[t];
                    if v >= gmax {
                        gmax = v;
                        i_sel = t;
                    }
                }
            }
            if i_sel == usize::MAX {
                break;
            }
            let ki: Vec<f64> = rows.row(i_sel).to_vec();

            let mut gmin = f64::INFINITY;
            let mut j_sel = usize::MAX;
            let mut obj_min = f64::INFINITY;
            for t in 0..n {
                if !is_low(alpha[t], ys[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = qd[i_sel] + qd[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
            if gmax - gmin < cfg.tolerance || j_sel == usize::MAX {
                break;
            }
            let (i, j) = (i_sel, j_sel);
            let kj: Vec<f64> = rows.row(j).to_vec();

            let (old_ai, old_aj) = (alpha[i], alpha[j]);
            let qij = ys[i] * ys[j] * ki[j];
            if ys[i] != ys[j] {
                let mut quad = qd[i] + qd[j] + 2.0 * qij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = qd[i] + qd[j] - 2.0 * qij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }

            let dai = alpha[i] - old_ai;
            let daj = alpha[j] - old_aj;
            for t in 0..n {
                grad[t] += ys[t] * (ys[i] * ki[t] * dai + ys[j] * kj[t] * daj);
            }
        }

        // Bias from free vectors, or the midpoint of the feasible range.
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut n_free = 0;
        for t in 0..n {
            let yg = ys[t] * grad[t];
            if alpha[t] >= c {
                if ys[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if ys[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                free_sum += yg;
            }
        }
        let rho = if n_free > 0 {
            free_sum / n_free as f64
        } else {
            0.5 * (ub + lb)
        };

        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        Ok(SvmModel {
            kernel,
            support: x.select_rows(&sv),
            coef: sv.iter().map(|&t| alpha[t] * ys[t]).collect(),
            rho,
        })
    }

    /// Signed decision value; positive means local class 1.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support
            .iter_rows()
            .zip(&self.coef)
            .map(|(s, a)| a * self.kernel.eval(s, row))
            .sum::<f64>()
            - self.rho
    }

    pub fn support_vector_count(&self) -> usize {
        self.coef.len()
    }
}
