//! Constrained least-squares fit of `f(x) = alpha - beta * x^gamma`.
//!
//! For a fixed `gamma` the model is linear in `(alpha, beta)`, so the inner
//! problem is a two-variable box-constrained least squares solved exactly by
//! enumerating the interior optimum and the optimum on each active face. The
//! outer search over `gamma` scans a fixed grid and refines the best local
//! minima with golden-section search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which per-size statistic a curve was fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lower,
    Mean,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCurve {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mae: f64,
    pub sse: f64,
    pub bound_kind: BoundKind,
    /// False when the `gamma` refinement stopped at its iteration cap.
    pub converged: bool,
}

impl PowerLawCurve {
    pub fn evaluate(&self, x: f64) -> f64 {
        evaluate_curve(self.alpha, self.beta, self.gamma, x)
    }
}

pub fn evaluate_curve(alpha: f64, beta: f64, gamma: f64, x: f64) -> f64 {
    alpha - beta * x.powf(gamma)
}

/// Steepest exponent considered. Beyond this the term `x^gamma` is below
/// 1e-12 for every size >= 4, i.e. indistinguishable from a flat curve.
pub const GAMMA_FLOOR: f64 = -20.0;

const FINE_STEP: f64 = 0.002;
const FINE_LIMIT: f64 = -5.0;
const COARSE_STEP: f64 = 0.05;
const REFINE_TOL: f64 = 1e-12;
const REFINE_MAX_ITER: usize = 200;
const REFINED_MINIMA: usize = 6;

struct Profile<'a> {
    x_ln: Vec<f64>,
    y: &'a [f64],
    lo: f64,
}

#[derive(Clone, Copy)]
struct Inner {
    alpha: f64,
    beta: f64,
    sse: f64,
}

impl Profile<'_> {
    fn sse(&self, t: &[f64], alpha: f64, beta: f64) -> f64 {
        self.y
            .iter()
            .zip(t)
            .map(|(y, t)| {
                let r = y - alpha + beta * t;
                r * r
            })
            .sum()
    }

    /// Exact minimizer over `alpha in [lo, 1]`, `beta >= 0` for fixed `gamma`.
    fn solve(&self, gamma: f64) -> Inner {
        let t: Vec<f64> = self.x_ln.iter().map(|l| (gamma * l).exp()).collect();
        let n = t.len() as f64;
        let y_mean = self.y.iter().sum::<f64>() / n;
        let t_mean = t.iter().sum::<f64>() / n;
        let stt: f64 = t.iter().map(|v| (v - t_mean) * (v - t_mean)).sum();
        let sty: f64 = t.iter().zip(self.y).map(|(a, b)| (a - t_mean) * (b - y_mean)).sum();
        let tt: f64 = t.iter().map(|v| v * v).sum();

        let mut cands: Vec<(f64, f64)> = Vec::with_capacity(4);
        cands.push((y_mean.clamp(self.lo, 1.0), 0.0));
        for a in [self.lo, 1.0] {
            let b = if tt > 0.0 {
                (t.iter().zip(self.y).map(|(t, y)| t * (a - y)).sum::<f64>() / tt).max(0.0)
            } else {
                0.0
            };
            cands.push((a, b));
        }
        if stt > 1e-300 * n {
            let b = -sty / stt;
            let a = y_mean + b * t_mean;
            if b >= 0.0 && a >= self.lo && a <= 1.0 {
                cands.push((a, b));
            }
        }

        let mut best = Inner {
            alpha: cands[0].0,
            beta: cands[0].1,
            sse: self.sse(&t, cands[0].0, cands[0].1),
        };
        for &(alpha, beta) in &cands[1..] {
            let sse = self.sse(&t, alpha, beta);
            if sse < best.sse {
                best = Inner { alpha, beta, sse };
            }
        }
        best
    }
}

fn gamma_grid() -> Vec<f64> {
    let mut g = Vec::new();
    let fine = (-FINE_LIMIT / FINE_STEP).round() as usize;
    for k in 0..=fine {
        g.push(-(k as f64) * FINE_STEP);
    }
    let coarse = ((GAMMA_FLOOR - FINE_LIMIT) / -COARSE_STEP).round() as usize;
    for k in 1..=coarse {
        g.push(FINE_LIMIT - k as f64 * COARSE_STEP);
    }
    g
}

/// Golden-section minimum of the profile on `[a, b]`.
fn refine(p: &Profile<'_>, mut a: f64, mut b: f64) -> (f64, Inner, bool) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = p.solve(c);
    let mut fd = p.solve(d);
    for _ in 0..REFINE_MAX_ITER {
        if (b - a).abs() <= REFINE_TOL {
            let (g, f) = if fc.sse <= fd.sse { (c, fc) } else { (d, fd) };
            return (g, f, true);
        }
        if fc.sse <= fd.sse {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = p.solve(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = p.solve(d);
        }
    }
    let (g, f) = if fc.sse <= fd.sse { (c, fc) } else { (d, fd) };
    (g, f, false)
}

/// Least-squares inverse power law subject to `y_max <= alpha <= 1`,
/// `beta >= 0`, `gamma <= 0`. Points are `(size, target)`.
pub fn fit_power_law(points: &[(f64, f64)], y_max: f64, bound_kind: BoundKind) -> Result<PowerLawCurve> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "power law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x >= 1.0 && x.is_finite()) || !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("invalid curve point ({x}, {y})")));
        }
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::invalid("power law fit needs at least 3 distinct sizes"));
    }
    if !(0.0..=1.0).contains(&y_max) {
        return Err(Error::invalid(format!("y_max {y_max} outside [0, 1]")));
    }

    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let profile = Profile {
        x_ln: points.iter().map(|p| p.0.ln()).collect(),
        y: &y,
        lo: y_max,
    };

    let grid = gamma_grid();
    let values: Vec<Inner> = grid.iter().map(|&g| profile.solve(g)).collect();

    // Local minima of the gridded profile, best first.
    let mut minima: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let left = k == 0 || values[k].sse <= values[k - 1].sse;
            let right = k + 1 == grid.len() || values[k].sse <= values[k + 1].sse;
            left && right
        })
        .collect();
    minima.sort_by(|&a, &b| values[a].sse.total_cmp(&values[b].sse).then(a.cmp(&b)));
    minima.truncate(REFINED_MINIMA);

    let mut best_gamma = grid[minima[0]];
    let mut best = values[minima[0]];
    let mut converged = true;
    for &k in &minima {
        // Grid runs from 0 downwards, so k - 1 is the larger neighbour.
        let hi = if k == 0 { grid[0] } else { grid[k - 1] };
        let lo = if k + 1 == grid.len() { grid[k] } else { grid[k + 1] };
        let (g, inner, ok) = refine(&profile, lo, hi);
        if inner.sse < best.sse {
            best = inner;
            best_gamma = g;
            converged = ok;
        }
    }

    let (alpha, beta, gamma) = if best.beta == 0.0 {
        (best.alpha, 0.0, 0.0)
    } else {
        (best.alpha, best.beta, best_gamma.min(0.0))
    };
    let mut sse = 0.0;
    let mut abs = 0.0;
    for &(x, t) in points {
        let r = t - evaluate_curve(alpha, beta, gamma, x);
        sse += r * r;
        abs += r.abs();
    }
    Ok(PowerLawCurve {
        alpha,
        beta,
        gamma,
        mae: abs / points.len() as f64,
        sse,
        bound_kind,
        converged,
    })
}
