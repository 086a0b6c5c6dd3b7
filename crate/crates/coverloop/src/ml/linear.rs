//! Least-squares family: ordinary, ridge-penalized, and lasso regression.
//!
//! Features are standardized internally (zero mean, unit population
//! variance); coefficients are mapped back to raw units before they are
//! returned, so predictions never depend on the internal scaling. On
//! rank-deficient data the ordinary solver returns the minimum-norm
//! minimizer in standardized coordinates.

use crate::error::{Error, Result};
use crate::ml::DesignMatrix;

/// Raw-space linear coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoef {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearCoef {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}

struct Standardized {
    /// Column-major centered and scaled features.
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    y_centered: Vec<f64>,
    y_mean: f64,
}

fn standardize(x: &DesignMatrix) -> Standardized {
    let n = x.rows.len();
    let p = x.width();
    let nf = n as f64;
    let mut cols = vec![vec![0.0; n]; p];
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in 0..p {
        let mut mean = 0.0;
        for row in &x.rows {
            mean += row[j];
        }
        mean /= nf;
        let mut var = 0.0;
        for row in &x.rows {
            var += (row[j] - mean) * (row[j] - mean);
        }
        var /= nf;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        for (i, row) in x.rows.iter().enumerate() {
            cols[j][i] = (row[j] - mean) / scale;
        }
        means[j] = mean;
        scales[j] = scale;
    }
    let y_mean = x.labels.iter().sum::<f64>() / nf;
    let y_centered = x.labels.iter().map(|y| y - y_mean).collect();
    Standardized {
        cols,
        means,
        scales,
        y_centered,
        y_mean,
    }
}

fn unstandardize(std: &Standardized, w_std: &[f64]) -> LinearCoef {
    let weights: Vec<f64> = w_std
        .iter()
        .zip(&std.scales)
        .map(|(w, s)| w / s)
        .collect();
    let intercept = std.y_mean
        - weights
            .iter()
            .zip(&std.means)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    LinearCoef { weights, intercept }
}

/// Ordinary least squares: minimizes the residual sum of squares.
pub fn fit_ols(x: &DesignMatrix) -> Result<LinearCoef> {
    fit_ridge(x, 0.0)
}

/// Ridge regression: residual sum of squares plus `lambda * ||w||^2` on the
/// standardized coefficients; the intercept is unpenalized.
#[allow(clippy::needless_range_loop)]
pub fn fit_ridge(x: &DesignMatrix, lambda: f64) -> Result<LinearCoef> {
    if lambda < 0.0 {
        return Err(Error::Parameter(format!(
            "ridge lambda must be non-negative, got {lambda}"
        )));
    }
    x.validate()?;
    let p = x.width();
    let std = standardize(x);
    if p == 0 {
        return Ok(LinearCoef {
            weights: vec![],
            intercept: std.y_mean,
        });
    }
    // Normal equations on the standardized problem.
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for j in 0..p {
        for k in j..p {
            let dot: f64 = std.cols[j].iter().zip(&std.cols[k]).map(|(a, b)| a * b).sum();
            gram[j][k] = dot;
            gram[k][j] = dot;
        }
        rhs[j] = std.cols[j]
            .iter()
            .zip(&std.y_centered)
            .map(|(a, b)| a * b)
            .sum();
    }
    let (eigenvalues, vectors) = jacobi_eigen(gram);
    let max_eig = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-12 * max_eig.max(1.0);
    // w = V diag(g) V^T rhs with g_i = 1/(lambda_i + lambda), dropping the
    // null space so the lambda = 0 solution is the minimum-norm one.
    let mut vt_rhs = vec![0.0; p];
    for i in 0..p {
        vt_rhs[i] = (0..p).map(|r| vectors[r][i] * rhs[r]).sum();
    }
    for i in 0..p {
        vt_rhs[i] = if eigenvalues[i] > cutoff {
            vt_rhs[i] / (eigenvalues[i] + lambda)
        } else {
            0.0
        };
    }
    let mut w_std = vec![0.0; p];
    for r in 0..p {
        w_std[r] = (0..p).map(|i| vectors[r][i] * vt_rhs[i]).sum();
    }
    Ok(unstandardize(&std, &w_std))
}

/// Lasso via cyclic coordinate descent with soft thresholding on the
/// standardized problem `1/(2n) * RSS + lambda * ||w||_1`; the intercept is
/// unpenalized. Converged when the largest coefficient change in a sweep
/// drops below 1e-6, capped at 10^4 sweeps.
pub fn fit_lasso(x: &DesignMatrix, lambda: f64) -> Result<LinearCoef> {
    if lambda < 0.0 {
        return Err(Error::Parameter(format!(
            "lasso lambda must be non-negative, got {lambda}"
        )));
    }
    x.validate()?;
    let n = x.rows.len();
    let p = x.width();
    let std = standardize(x);
    if p == 0 {
        return Ok(LinearCoef {
            weights: vec![],
            intercept: std.y_mean,
        });
    }
    let nf = n as f64;
    let col_norms: Vec<f64> = std
        .cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();
    let mut w = vec![0.0; p];
    let mut residual = std.y_centered.clone();
    for _ in 0..10_000 {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_norms[j] == 0.0 {
                continue;
            }
            let rho = std.cols[j]
                .iter()
                .zip(&residual)
                .map(|(xj, r)| xj * r)
                .sum::<f64>()
                / nf
                + col_norms[j] * w[j];
            let w_new = soft_threshold(rho, lambda) / col_norms[j];
            let delta = w_new - w[j];
            if delta != 0.0 {
                for (r, xj) in residual.iter_mut().zip(&std.cols[j]) {
                    *r -= xj * delta;
                }
                w[j] = w_new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < 1e-6 {
            break;
        }
    }
    Ok(unstandardize(&std, &w))
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the matrix of eigenvectors (one per column).
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut v = vec![vec![0.0; p]; p];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for r in 0..p {
            for c in (r + 1)..p {
                off += a[r][c] * a[r][c];
            }
        }
        if off <= 1e-30 {
            break;
        }
        for r in 0..p {
            for c in (r + 1)..p {
                if a[r][c].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[c][c] - a[r][r]) / (2.0 * a[r][c]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..p {
                    let arc = a[r][k];
                    let ack = a[c][k];
                    a[r][k] = cos * arc - sin * ack;
                    a[c][k] = sin * arc + cos * ack;
                }
                for k in 0..p {
                    let akr = a[k][r];
                    let akc = a[k][c];
                    a[k][r] = cos * akr - sin * akc;
                    a[k][c] = sin * akr + cos * akc;
                }
                for k in 0..p {
                    let vkr = v[k][r];
                    let vkc = v[k][c];
                    v[k][r] = cos * vkr - sin * vkc;
                    v[k][c] = sin * vkr + cos * vkc;
                }
            }
        }
    }
    let eigenvalues = (0..p).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}
