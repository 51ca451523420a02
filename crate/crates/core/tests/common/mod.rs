//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use stss_core::classifiers::MethodId;
use stss_core::curves::AccuracyRecord;
use stss_core::Matrix;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn bcw_paths() -> (PathBuf, PathBuf) {
    let d = workspace_root().join("datasets/bcw");
    (d.join("bcw.csv"), d.join("schema.json"))
}

/// Gaussian naive Bayes posterior computed directly from the definition:
/// class frequency priors, per-class mean and population variance plus
/// 1e-9 times the largest overall feature variance (1e-9 itself when every
/// feature is constant).
pub fn nb_posterior(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, query: &[f64]) -> Vec<f64> {
    let n = rows.len() as f64;
    let d = query.len();
    let mut max_var = 0.0f64;
    for j in 0..d {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let v = rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
        max_var = max_var.max(v);
    }
    let eps = if max_var > 0.0 { 1e-9 * max_var } else { 1e-9 };
    let mut log_joint = Vec::new();
    for c in 0..n_classes {
        let members: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        let k = members.len() as f64;
        let mut lj = (k / n).ln();
        for j in 0..d {
            let m = members.iter().map(|r| r[j]).sum::<f64>() / k;
            let v = members.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / k + eps;
            let z = query[j] - m;
            lj += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - z * z / (2.0 * v);
        }
        log_joint.push(lj);
    }
    let mx = log_joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = log_joint.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Unit-variance Gaussian blobs, one per class, with centres 10 units
/// apart along the first axis. Columns are standardized with the statistics
/// of the returned sample.
pub fn blobs(n_per_class: usize, n_classes: usize, dim: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let (rows, labels) = blob_rows(n_per_class, n_classes, dim, seed);
    let stats = column_stats(&rows);
    (standardize(&rows, &stats), labels)
}

/// Two-class 2-D blobs with means 10 apart: (train x, train y, test x,
/// test y), 200 points each, both standardized with training statistics.
pub fn separable_split(seed: u64) -> (Matrix, Vec<usize>, Matrix, Vec<usize>) {
    let (train, ytr) = blob_rows(100, 2, 2, seed);
    let (test, yte) = blob_rows(100, 2, 2, seed ^ 0x5eed);
    let stats = column_stats(&train);
    (standardize(&train, &stats), ytr, standardize(&test, &stats), yte)
}

fn blob_rows(n_per_class: usize, n_classes: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..n_classes {
        for _ in 0..n_per_class {
            let row: Vec<f64> = (0..dim)
                .map(|j| {
                    let centre = if j == 0 { 10.0 * c as f64 } else { 0.0 };
                    centre + noise.sample(&mut rng)
                })
                .collect();
            rows.push(row);
            labels.push(c);
        }
    }
    (rows, labels)
}

fn column_stats(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    (0..rows[0].len())
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            (m, v.sqrt())
        })
        .collect()
}

fn standardize(rows: &[Vec<f64>], stats: &[(f64, f64)]) -> Matrix {
    let out: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(stats).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    Matrix::from_rows(&out).unwrap()
}

/// Minimum SSE of `alpha - beta x^gamma` over a 50^3 grid with
/// alpha in [y_max, 1], beta in [0, 2], gamma in [-2, 0].
pub fn grid_min_sse(points: &[(f64, f64)], y_max: f64) -> f64 {
    let steps = 50;
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (steps - 1) as f64;
    let mut best = f64::INFINITY;
    for gi in 0..steps {
        let g = lin(-2.0, 0.0, gi);
        let t: Vec<f64> = points.iter().map(|p| p.0.powf(g)).collect();
        for ai in 0..steps {
            let a = lin(y_max, 1.0, ai);
            for bi in 0..steps {
                let b = lin(0.0, 2.0, bi);
                let sse: f64 = points
                    .iter()
                    .zip(&t)
                    .map(|(p, t)| {
                        let r = p.1 - (a - b * t);
                        r * r
                    })
                    .sum();
                best = best.min(sse);
            }
        }
    }
    best
}

/// Smallest integer x in [1, limit] with alpha - beta x^gamma >= target.
pub fn scan_stss(alpha: f64, beta: f64, gamma: f64, target: f64, limit: u64) -> Option<u64> {
    (1..=limit).find(|&x| alpha - beta * (x as f64).powf(gamma) >= target)
}

/// Order-statistic bounds by sorting ascending: the lower bound is the
/// (floor(n (1 - level) / 2) + 1)-th smallest value, the upper bound the
/// same rank from the top.
pub fn brute_force_bounds(values: &[f64], level: f64) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = ((n as f64 * (1.0 - level) / 2.0) + 1e-9).floor() as usize + 1;
    (v[k - 1], v[n - k])
}

pub fn records_from_values(dataset: &str, size: usize, values: &[f64]) -> Vec<AccuracyRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &a)| AccuracyRecord {
            dataset: dataset.into(),
            size,
            fold: i / 10,
            rep: i % 10,
            winning_method: MethodId::Logistic,
            accuracy: a,
            per_method: BTreeMap::new(),
        })
        .collect()
}

/// Writes a two-class, three-feature CSV (one categorical) with schema,
/// returning (data path, schema path).
pub fn write_synthetic_dataset(dir: &Path, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut csv = String::from("a,b,colour,label\n");
    for i in 0..n {
        let pos = i % 3 != 0;
        let shift = if pos { 1.5 } else { -1.5 };
        let a: f64 = shift + noise.sample(&mut rng);
        let b: f64 = 0.5 * shift + noise.sample(&mut rng);
        let colour = ["red", "green", "blue"][rng.random_range(0..3)];
        csv.push_str(&format!("{a:.4},{b:.4},{colour},{}\n", if pos { "yes" } else { "no" }));
    }
    let schema = r#"{"target": "label", "columns": [
        {"name": "a", "kind": "continuous"},
        {"name": "b", "kind": "continuous"},
        {"name": "colour", "kind": "categorical"},
        {"name": "label", "kind": "categorical"}]}"#;
    let data = dir.join("synthetic.csv");
    let schema_path = dir.join("synthetic.schema.json");
    std::fs::write(&data, csv).unwrap();
    std::fs::write(&schema_path, schema).unwrap();
    (data, schema_path)
}
