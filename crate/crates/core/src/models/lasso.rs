//! Lasso via cyclic coordinate descent with soft-thresholding.
//!
//! Columns are standardized internally and coefficients restored to the
//! original scale on output. The objective in the standardized space is
//! `(1/2n)‖ỹ − X̃β‖² + λ‖β‖₁`; the final KKT residual is recorded so a
//! caller can see how close the returned point is to stationarity.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max stationarity violation in the standardized problem.
    pub kkt_residual: f64,
    pub input_dim: usize,
}

impl LassoModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

/// Non-convergence is not an error: the model is returned with
/// `converged = false` and the KKT residual tells the caller how far off it
/// stopped.
pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64, tol: f64, max_iter: usize) -> LassoModel {
    assert!(lambda >= 0.0, "lambda must be non-negative");
    assert!(tol > 0.0, "tol must be positive");
    let n = x.rows();
    let d = x.cols();
    assert!(n >= 1, "need at least one training row");

    // standardize columns; constant columns are skipped entirely
    let mut means = vec![0.0; d];
    let mut sds = vec![0.0; d];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        means[j] = mean;
        sds[j] = sd;
        if sd > 0.0 {
            cols.push(col.iter().map(|v| (v - mean) / sd).collect());
        } else {
            cols.push(vec![0.0; n]);
        }
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let mut beta = vec![0.0; d];
    let mut residual = y_centered.clone();
    let mut converged = false;
    let mut iterations = 0;

    for sweep in 0..max_iter {
        iterations = sweep + 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if sds[j] == 0.0 {
                continue;
            }
            // x̃ⱼᵀx̃ⱼ / n = 1 by standardization
            let rho = cols[j]
                .iter()
                .zip(&residual)
                .map(|(xj, r)| xj * r)
                .sum::<f64>()
                / n as f64
                + beta[j];
            let updated = soft_threshold(rho, lambda);
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, xj) in residual.iter_mut().zip(&cols[j]) {
                    *r -= delta * xj;
                }
                beta[j] = updated;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }

    let mut kkt_residual: f64 = 0.0;
    for j in 0..d {
        if sds[j] == 0.0 {
            continue;
        }
        let grad = cols[j]
            .iter()
            .zip(&residual)
            .map(|(xj, r)| xj * r)
            .sum::<f64>()
            / n as f64;
        let violation = if beta[j] != 0.0 {
            (grad - lambda * beta[j].signum()).abs()
        } else {
            (grad.abs() - lambda).max(0.0)
        };
        kkt_residual = kkt_residual.max(violation);
    }
    if !converged {
        log::warn!("lasso stopped after {max_iter} sweeps, kkt residual {kkt_residual:.3e}");
    }

    // back to the original scale
    let coefficients: Vec<f64> = beta
        .iter()
        .zip(&sds)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(c, m)| c * m)
            .sum::<f64>();

    LassoModel {
        coefficients,
        intercept,
        lambda,
        converged,
        iterations,
        kkt_residual,
        input_dim: d,
    }
}
