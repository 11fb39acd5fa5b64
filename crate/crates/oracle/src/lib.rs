//! Slow, independent reference implementations for checking `ease-core`.
//!
//! Nothing here shares code with the core crate: systems are solved by
//! Gaussian elimination with partial pivoting, products are triple loops,
//! and the constrained objective is minimized by plain projected gradient
//! descent. Matrices are dense, row-major `Vec<Vec<f64>>`, sized for tests
//! (a few hundred rows at most).

use thiserror::Error;

pub type Mat = Vec<Vec<f64>>;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("singular system at column {0}")]
    Singular(usize),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("gradient descent diverged at step {step}: objective {objective}")]
    Diverged { step: usize, objective: f64 },
    #[error("item index {0} out of range")]
    BadIndex(usize),
}

pub fn zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn transpose(a: &Mat) -> Mat {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let inner = b.len();
    let mut c = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..inner {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

/// `XᵀX`.
pub fn gram(x: &Mat) -> Mat {
    matmul(&transpose(x), x)
}

pub fn from_flat(values: &[f64], n: usize) -> Mat {
    values.chunks(n).map(<[f64]>::to_vec).collect()
}

pub fn flatten(a: &Mat) -> Vec<f64> {
    a.iter().flatten().copied().collect()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    let mut aug: Mat = a.iter().zip(b).map(|(r, &bi)| {
        let mut r = r.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| aug[p][col].abs().total_cmp(&aug[q][col].abs()))
            .expect("non-empty range");
        if aug[pivot][col].abs() < 1e-300 {
            return Err(OracleError::Singular(col));
        }
        aug.swap(col, pivot);
        for r in col + 1..n {
            let f = aug[r][col] / aug[col][col];
            if f != 0.0 {
                for c in col..=n {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = aug[r][n];
        for c in r + 1..n {
            s -= aug[r][c] * z[c];
        }
        z[r] = s / aug[r][r];
    }
    Ok(z)
}

/// Ridge regression of column `j` of `x` on all other columns; the returned
/// weight vector has 0 at position `j`.
pub fn ridge_column(x: &Mat, j: usize, lambda: f64) -> Result<Vec<f64>, OracleError> {
    if !(lambda > 0.0) {
        return Err(OracleError::BadLambda(lambda));
    }
    let n = x.first().map_or(0, Vec::len);
    if j >= n {
        return Err(OracleError::BadIndex(j));
    }
    let others: Vec<usize> = (0..n).filter(|&c| c != j).collect();
    let m = others.len();
    let mut a = zeros(m, m);
    let mut b = vec![0.0; m];
    for (p, &cp) in others.iter().enumerate() {
        for (q, &cq) in others.iter().enumerate() {
            a[p][q] = x.iter().map(|row| row[cp] * row[cq]).sum();
        }
        a[p][p] += lambda;
        b[p] = x.iter().map(|row| row[cp] * row[j]).sum();
    }
    let w = solve_linear(&a, &b)?;
    let mut out = vec![0.0; n];
    for (p, &c) in others.iter().enumerate() {
        out[c] = w[p];
    }
    Ok(out)
}

/// All columns of the constrained ridge solution, as an n×n matrix.
pub fn ridge_all(x: &Mat, lambda: f64) -> Result<Mat, OracleError> {
    let n = x.first().map_or(0, Vec::len);
    let mut b = zeros(n, n);
    for j in 0..n {
        let w = ridge_column(x, j, lambda)?;
        for i in 0..n {
            b[i][j] = w[i];
        }
    }
    Ok(b)
}

/// `tr((I−B)ᵀ G (I−B)) + λ‖B‖²_F`, which equals `‖X − XB‖²_F + λ‖B‖²_F`
/// when `G = XᵀX`.
pub fn objective(g: &Mat, b: &Mat, lambda: f64) -> f64 {
    let n = g.len();
    let mut r = identity(n);
    for i in 0..n {
        for j in 0..n {
            r[i][j] -= b[i][j];
        }
    }
    let gr = matmul(g, &r);
    let mut fit = 0.0;
    for i in 0..n {
        for j in 0..n {
            fit += r[i][j] * gr[i][j];
        }
    }
    let reg: f64 = b.iter().flatten().map(|v| v * v).sum();
    fit + lambda * reg
}

#[derive(Clone, Debug)]
pub struct Descent {
    pub b: Mat,
    pub objectives: Vec<f64>,
}

/// Projected gradient descent on the zero-diagonal ridge objective.
///
/// The gradient is `2(G(B − I) + λB)`; after each step the diagonal is reset
/// to 0. Fails when the objective rises for 10 steps in a row.
pub fn gd_descent(g: &Mat, lambda: f64, steps: usize, rate: f64, init: &Mat) -> Result<Descent, OracleError> {
    if !(lambda > 0.0) {
        return Err(OracleError::BadLambda(lambda));
    }
    let n = g.len();
    let mut b = init.clone();
    for (i, row) in b.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let mut objectives = vec![objective(g, &b, lambda)];
    let mut rising = 0;
    for step in 0..steps {
        let gb = matmul(g, &b);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let grad = 2.0 * (gb[i][j] - g[i][j] + lambda * b[i][j]);
                    b[i][j] -= rate * grad;
                }
            }
        }
        let obj = objective(g, &b, lambda);
        let prev = *objectives.last().expect("seeded");
        rising = if obj > prev { rising + 1 } else { 0 };
        objectives.push(obj);
        if rising >= 10 || !obj.is_finite() {
            return Err(OracleError::Diverged { step, objective: obj });
        }
    }
    Ok(Descent { b, objectives })
}

/// A step size that is guaranteed to descend: `1 / (2(λ_max(G) + λ))`,
/// with the top eigenvalue bounded by the largest absolute row sum.
pub fn safe_rate(g: &Mat, lambda: f64) -> f64 {
    let bound = g.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    0.5 / (bound + lambda)
}

/// `Q A Qᵀ` for the permutation sending index `i` to `perm[i]`.
pub fn permute_sym(a: &Mat, perm: &[usize]) -> Mat {
    let n = a.len();
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[perm[i]][perm[j]] = a[i][j];
        }
    }
    out
}
