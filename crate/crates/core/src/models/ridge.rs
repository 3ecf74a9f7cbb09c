//! Ridge regression via the normal equations and a Cholesky solve.
//!
//! The intercept is an appended constant column left out of the penalty.

use serde::{Deserialize, Serialize};

use crate::matrix::{cholesky_solve, Matrix};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub input_dim: usize,
}

impl RidgeModel {
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

/// Solves `(XᵀX + λ I*) β = Xᵀ y` where `I*` is zero at the intercept slot.
/// An unregularized singular system fails with advice to use `λ > 0`.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64, fit_intercept: bool) -> Result<RidgeModel> {
    assert!(lambda >= 0.0, "lambda must be non-negative");
    let d = x.cols();
    let n = x.rows();
    assert!(n >= 1, "need at least one training row");

    let augmented = if fit_intercept {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for r in x.row_iter() {
            let mut row = r.to_vec();
            row.push(1.0);
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    } else {
        x.clone()
    };

    let mut a = augmented.gram();
    for j in 0..d {
        let v = a.get(j, j) + lambda;
        a.set(j, j, v);
    }
    let rhs = augmented.t_mul_vec(y);
    let solution = cholesky_solve(&a, &rhs)?;

    let (coefficients, intercept) = if fit_intercept {
        (solution[..d].to_vec(), solution[d])
    } else {
        (solution, 0.0)
    };
    Ok(RidgeModel {
        coefficients,
        intercept,
        lambda,
        input_dim: d,
    })
}
