//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesConfig {
    /// Added to every per-class variance, as a fraction of the largest
    /// feature variance in the training set.
    pub variance_floor: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        NaiveBayesConfig {
            variance_floor: 1e-9,
        }
    }
}

impl NaiveBayesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_floor > 0.0) {
            return Err(Error::invalid("naive_bayes: variance_floor must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    log_prior: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, cfg: &NaiveBayesConfig) -> Result<Self> {
        let d = x.cols();
        let n = x.rows() as f64;

        let mut max_var = 0.0f64;
        for j in 0..d {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            max_var = max_var.max(v);
        }
        let epsilon = if max_var > 0.0 {
            cfg.variance_floor * max_var
        } else {
            cfg.variance_floor
        };

        let mut counts = vec![0usize; n_classes];
        let mut sums = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.iter_rows().zip(y) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row) {
                *s += v;
            }
        }
        let means: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &k)| s.iter().map(|v| v / k.max(1) as f64).collect())
            .collect();
        let mut variances = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.iter_rows().zip(y) {
            for j in 0..d {
                variances[c][j] += (row[j] - means[c][j]).powi(2);
            }
        }
        for (c, var) in variances.iter_mut().enumerate() {
            for v in var.iter_mut() {
                *v = *v / counts[c].max(1) as f64 + epsilon;
            }
        }
        let log_prior = counts
            .iter()
            .map(|&k| if k == 0 { f64::NEG_INFINITY } else { (k as f64 / n).ln() })
            .collect();
        Ok(GaussianNb {
            log_prior,
            means,
            variances,
        })
    }

    /// `ln P(c) + sum_k ln N(x_k; mu_ck, var_ck)` for every class.
    pub fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        const LN_2PI: f64 = 1.837_877_066_409_345_3;
        self.log_prior
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(lp, (mu, var))| {
                let ll: f64 = row
                    .iter()
                    .zip(mu.iter().zip(var))
                    .map(|(x, (m, v))| -0.5 * (LN_2PI + v.ln()) - 0.5 * (x - m).powi(2) / v)
                    .sum();
                lp + ll
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::argmax;

    #[test]
    fn one_dimensional_posterior() {
        let x = Matrix::from_rows(&[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]]).unwrap();
        let nb = GaussianNb::fit(&x, &[0, 0, 1, 1], 2, &NaiveBayesConfig::default()).unwrap();
        assert_eq!(argmax(&nb.log_joint(&[0.9])), 1);
        assert_eq!(argmax(&nb.log_joint(&[-0.9])), 0);
        // Symmetric setup: x = 0 is an exact tie and goes to class 0.
        let s = nb.log_joint(&[0.0]);
        assert_eq!(s[0], s[1]);
        assert_eq!(argmax(&s), 0);
    }

    #[test]
    fn priors_follow_counts() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![1.0]]).unwrap();
        let nb = GaussianNb::fit(&x, &[0, 0, 0, 1], 2, &NaiveBayesConfig::default()).unwrap();
        assert!((nb.log_prior[0] - 0.75f64.ln()).abs() < 1e-15);
        assert!((nb.log_prior[1] - 0.25f64.ln()).abs() < 1e-15);
    }
}
