//! Small dense solvers: Cholesky for symmetric positive definite systems and
//! Householder QR for least squares.

/// Solves `a x = b` for symmetric positive definite `a` (row-major, n x n).
/// Returns `None` when the factorization breaks down.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Ordinary least squares solution computed by Householder QR.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Residual sum of squares.
    pub sse: f64,
    /// Diagonal of `(X^T X)^{-1}`.
    pub inverse_gram_diag: Vec<f64>,
}

/// Solves `min ||X b - y||` for a full-column-rank `X` given column-major as
/// `columns`. Returns `None` if a column is (numerically) dependent on the
/// previous ones.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<LeastSquares> {
    let p = columns.len();
    let n = y.len();
    if p == 0 || n < p || columns.iter().any(|c| c.len() != n) {
        return None;
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let scale: Vec<f64> = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale[k].max(f64::MIN_POSITIVE) {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k) {
                let d: f64 = v.iter().zip(&col[k..]).map(|(x, y)| x * y).sum();
                let f = 2.0 * d / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let d: f64 = v.iter().zip(&qty[k..]).map(|(x, y)| x * y).sum();
            let f = 2.0 * d / vnorm2;
            for (c, vi) in qty[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }

    // R is upper triangular: r[i][j] = a[j][i] for i <= j.
    let r = |i: usize, j: usize| a[j][i];
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in i + 1..p {
            s -= r(i, j) * coef[j];
        }
        coef[i] = s / r(i, i);
    }
    let sse = qty[p..].iter().map(|v| v * v).sum();

    // R^{-1} by back substitution; diag((X^T X)^{-1}) = row norms of R^{-1}.
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += r(i, k) * rinv[k][j];
            }
            rinv[i][j] = -s / r(i, i);
        }
    }
    let inverse_gram_diag = (0..p)
        .map(|i| rinv[i][i..].iter().map(|v| v * v).sum())
        .collect();

    Some(LeastSquares {
        coefficients: coef,
        sse,
        inverse_gram_diag,
    })
}
