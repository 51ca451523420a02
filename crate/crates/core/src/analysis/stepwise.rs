//! Forward stepwise ordinary least squares with t-test entry and removal.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: StepAction,
    pub feature: String,
    /// p-value that triggered the step.
    pub p_value: f64,
    /// Residual sum of squares after the step.
    pub sse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseModel {
    pub selected: Vec<SelectedFeature>,
    pub intercept: f64,
    pub p_enter: f64,
    pub p_remove: f64,
    pub sse: f64,
    pub steps: Vec<Step>,
}

/// OLS with intercept on a subset of columns, with two-sided t-test p-values.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub sse: f64,
    pub df: usize,
}

/// Two-sided p-value of a t statistic; `NaN` (0/0) maps to 1.
pub fn t_test_p_value(t: f64, df: usize) -> f64 {
    if t.is_nan() || df == 0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Fits `y ~ 1 + columns`. `None` when the design is rank deficient or
/// leaves no residual degrees of freedom.
pub fn ols(columns: &[&[f64]], y: &[f64]) -> Option<OlsFit> {
    let n = y.len();
    let p = columns.len();
    if n < p + 2 {
        return None;
    }
    let mut design = Vec::with_capacity(p + 1);
    design.push(vec![1.0; n]);
    design.extend(columns.iter().map(|c| c.to_vec()));
    let ls = least_squares(&design, y)?;
    let df = n - p - 1;
    let sigma2 = ls.sse / df as f64;
    let mut std_errors = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 1..=p {
        let se = (sigma2 * ls.inverse_gram_diag[j]).sqrt();
        std_errors.push(se);
        p_values.push(t_test_p_value(ls.coefficients[j] / se, df));
    }
    Some(OlsFit {
        intercept: ls.coefficients[0],
        coefficients: ls.coefficients[1..].to_vec(),
        std_errors,
        p_values,
        sse: ls.sse,
        df,
    })
}

/// Relative residual below which the current model is treated as exact and
/// no further candidate can enter.
const EXACT_FIT: f64 = 1e-20;

/// Forward stepwise selection over named candidate columns.
///
/// Candidates are tried in the order given; ties in p-value go to the
/// earlier one. After each addition the included feature with the largest
/// p-value above `p_remove` is dropped, repeatedly.
pub fn stepwise_fit(
    names: &[String],
    columns: &[Vec<f64>],
    y: &[f64],
    p_enter: f64,
    p_remove: f64,
) -> Result<StepwiseModel> {
    if names.len() != columns.len() {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            found: columns.len(),
        });
    }
    if let Some(c) = columns.iter().find(|c| c.len() != y.len()) {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: c.len(),
        });
    }
    if y.len() < 3 {
        return Err(Error::invalid(format!(
            "stepwise regression needs at least 3 rows, got {}",
            y.len()
        )));
    }
    if !(p_enter > 0.0 && p_enter <= 1.0) || !(p_remove > 0.0 && p_remove <= 1.0) {
        return Err(Error::invalid("p_enter and p_remove must lie in (0, 1]"));
    }

    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let fit_of = |set: &[usize]| -> Option<OlsFit> {
        let cols: Vec<&[f64]> = set.iter().map(|&j| columns[j].as_slice()).collect();
        ols(&cols, y)
    };

    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut seen: Vec<Vec<usize>> = vec![Vec::new()];
    let mut current_sse = sst;

    loop {
        if current_sse <= EXACT_FIT * sst {
            break;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..columns.len() {
            if selected.contains(&j) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(j);
            let Some(fit) = fit_of(&trial) else { continue };
            let p = fit.p_values[trial.len() - 1];
            if best.is_none_or(|(_, bp, _)| p < bp) {
                best = Some((j, p, fit.sse));
            }
        }
        let Some((j, p, sse)) = best.filter(|b| b.1 <= p_enter) else {
            break;
        };
        selected.push(j);
        current_sse = sse;
        steps.push(Step {
            action: StepAction::Add,
            feature: names[j].clone(),
            p_value: p,
            sse,
        });

        while let Some(fit) = fit_of(&selected) {
            let (worst, wp) = fit
                .p_values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
            if wp <= p_remove {
                break;
            }
            let removed = selected.remove(worst);
            current_sse = fit_of(&selected).map_or(sst, |f| f.sse);
            steps.push(Step {
                action: StepAction::Remove,
                feature: names[removed].clone(),
                p_value: wp,
                sse: current_sse,
            });
        }

        let mut key = selected.clone();
        key.sort_unstable();
        if seen.contains(&key) {
            break;
        }
        seen.push(key);
    }

    let (intercept, features, sse) = if selected.is_empty() {
        (y_mean, Vec::new(), sst)
    } else {
        let fit = fit_of(&selected).ok_or_else(|| Error::invalid("final stepwise design is rank deficient"))?;
        let features = selected
            .iter()
            .enumerate()
            .map(|(k, &j)| SelectedFeature {
                name: names[j].clone(),
                coefficient: fit.coefficients[k],
                std_error: fit.std_errors[k],
                p_value: fit.p_values[k],
            })
            .collect();
        (fit.intercept, features, fit.sse)
    };
    Ok(StepwiseModel {
        selected: features,
        intercept,
        p_enter,
        p_remove,
        sse,
        steps,
    })
}
