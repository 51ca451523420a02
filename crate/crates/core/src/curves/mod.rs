//! Empirical learning curves, inverse power law fits and the sufficient
//! training set size.

mod fit;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifiers::MethodId;
use crate::error::{Error, Result};

pub use fit::{evaluate_curve, fit_power_law, BoundKind, PowerLawCurve, GAMMA_FLOOR};

/// Best accuracy on one (size, fold, rep) training subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub dataset: String,
    pub size: usize,
    pub fold: usize,
    pub rep: usize,
    pub winning_method: MethodId,
    pub accuracy: f64,
    #[serde(default)]
    pub per_method: BTreeMap<MethodId, f64>,
}

impl AccuracyRecord {
    pub fn key(&self) -> (usize, usize, usize) {
        (self.size, self.fold, self.rep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// 1-based ranks, counted from the highest value, of the lower and upper
/// bounds of a two-sided `level` interval over `n` values.
///
/// The lower bound is the `ceil(n (1 + level) / 2)`-th highest value and the
/// upper bound mirrors it from the other end, so n = 100, level = 0.8 gives
/// the 90th and 11th highest.
pub fn bound_ranks(n: usize, level: f64) -> (usize, usize) {
    let lower = ((n as f64 * (1.0 + level) / 2.0) - 1e-9).ceil() as usize;
    let lower = lower.clamp(1, n);
    (lower, n + 1 - lower)
}

/// Per-size mean and order-statistic bounds, sorted by size.
pub fn empirical_curve(records: &[AccuracyRecord], level: f64) -> Result<Vec<CurvePoint>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    if records.is_empty() {
        return Err(Error::invalid("no accuracy records"));
    }
    let mut by_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_size.entry(r.size).or_default().push(r.accuracy);
    }
    Ok(by_size
        .into_iter()
        .map(|(size, mut v)| {
            // Descending; also fixes the summation order.
            v.sort_by(|a, b| b.total_cmp(a));
            let n = v.len();
            let (lo, hi) = bound_ranks(n, level);
            CurvePoint {
                size,
                n_samples: n,
                mean: mean_of(&v),
                lower: v[lo - 1],
                upper: v[hi - 1],
            }
        })
        .collect())
}

/// Mean taken relative to the first value, exact for constant input.
fn mean_of(v: &[f64]) -> f64 {
    let r = v[0];
    r + v.iter().map(|x| x - r).sum::<f64>() / v.len() as f64
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, f64::max)
}

pub fn fit_lower_curve(points: &[CurvePoint]) -> Result<PowerLawCurve> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.size as f64, p.lower)).collect();
    fit_power_law(&pts, max_of(pts.iter().map(|p| p.1)), BoundKind::Lower)
}

pub fn fit_mean_curve(points: &[CurvePoint]) -> Result<PowerLawCurve> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.size as f64, p.mean)).collect();
    fit_power_law(&pts, max_of(pts.iter().map(|p| p.1)), BoundKind::Mean)
}

/// Best attainable accuracy: the asymptote of the curve fitted to the means.
pub fn estimate_asymptote(points: &[CurvePoint]) -> Result<f64> {
    Ok(fit_mean_curve(points)?.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StssCriteria {
    /// Confidence that accuracy exceeds the lower curve.
    pub t1: f64,
    /// Allowed gap to the asymptote.
    pub t2: f64,
    pub x_min: usize,
}

impl StssCriteria {
    pub fn new(t1: f64, t2: f64, x_min: usize) -> Result<Self> {
        let c = StssCriteria { t1, t2, x_min };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1 < 1.0) || !(self.t2 > 0.0 && self.t2 < 1.0) {
            return Err(Error::invalid("t1 and t2 must lie in (0, 1)"));
        }
        if self.x_min == 0 {
            return Err(Error::invalid("x_min must be >= 1"));
        }
        Ok(())
    }

    /// Two-sided interval level whose lower bound is exceeded with
    /// probability `t1`.
    pub fn interval_level(&self) -> f64 {
        1.0 - 2.0 * (1.0 - self.t1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StssResult {
    pub stss: u64,
    pub clamped: bool,
    pub f_inf: f64,
    /// Closed-form solution; 1 for a flat curve.
    pub analytic_value: f64,
}

/// Largest STSS reported; beyond it the closed form is not trusted.
pub const STSS_LIMIT: f64 = 1e15;

/// Smallest integer size at which the lower curve reaches `f_inf - t2`,
/// never below `x_min`.
pub fn compute_stss(lower: &PowerLawCurve, f_inf: f64, criteria: &StssCriteria) -> Result<StssResult> {
    criteria.validate()?;
    let target = f_inf - criteria.t2;
    if lower.alpha - f_inf + criteria.t2 <= 0.0 {
        return Err(Error::Unreachable {
            alpha: lower.alpha,
            target,
        });
    }
    let f = |x: u64| lower.evaluate(x as f64);
    let x_min = criteria.x_min as u64;
    let clamped_at = |analytic_value: f64| StssResult {
        stss: x_min,
        clamped: true,
        f_inf,
        analytic_value,
    };
    if lower.beta == 0.0 {
        return Ok(clamped_at(1.0));
    }
    if lower.gamma == 0.0 {
        if f(x_min) >= target {
            return Ok(clamped_at(1.0));
        }
        return Err(Error::DegenerateCurve);
    }

    let analytic = ((lower.alpha - target).ln() - lower.beta.ln()) / lower.gamma;
    let analytic = analytic.exp();
    if !(analytic <= STSS_LIMIT) {
        return Err(Error::invalid(format!(
            "stss {analytic:e} exceeds the supported limit {STSS_LIMIT:e}"
        )));
    }
    // Align the rounded closed form with direct evaluation of the curve.
    let mut x = (analytic.ceil() as u64).max(1);
    while x > 1 && f(x - 1) >= target {
        x -= 1;
    }
    while f(x) < target {
        x += 1;
    }
    if x < x_min || f(x_min) >= target {
        return Ok(clamped_at(analytic));
    }
    Ok(StssResult {
        stss: x,
        clamped: false,
        f_inf,
        analytic_value: analytic,
    })
}
