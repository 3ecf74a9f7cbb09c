//! Gradient boosted regression trees for squared loss.
//!
//! Stagewise fitting: start from the target mean, then repeatedly fit a
//! tree to the current residuals and add it scaled by the learning rate.
//! Per-stage training loss is recorded with the model; for squared loss and
//! a rate in (0, 1] it never increases.

use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, TreeModel, TreeParams};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct GbtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub input_dim: usize,
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<TreeModel>,
    /// Training MSE after each stage, stage 0 being the constant fit.
    pub staged_loss: Vec<f64>,
}

pub fn fit_gbt(x: &Matrix, y: &[f64], params: &GbtParams) -> GbtModel {
    assert!(params.n_trees >= 1, "need at least one stage");
    assert!(
        params.learning_rate > 0.0 && params.learning_rate <= 1.0,
        "learning_rate must be in (0, 1]"
    );
    let n = x.rows();
    assert!(n >= 1, "need at least one training row");

    let init = y.iter().sum::<f64>() / n as f64;
    let mut current: Vec<f64> = vec![init; n];
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    let mse = |fit: &[f64]| -> f64 {
        fit.iter()
            .zip(y)
            .map(|(f, t)| (t - f) * (t - f))
            .sum::<f64>()
            / n as f64
    };

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut staged_loss = Vec::with_capacity(params.n_trees + 1);
    staged_loss.push(mse(&current));
    for _ in 0..params.n_trees {
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
        let tree = fit_tree(x, &residuals, &tree_params);
        for (c, row) in current.iter_mut().zip(x.row_iter()) {
            *c += params.learning_rate * tree.predict_one(row);
        }
        staged_loss.push(mse(&current));
        trees.push(tree);
    }

    GbtModel {
        input_dim: x.cols(),
        init,
        learning_rate: params.learning_rate,
        trees,
        staged_loss,
    }
}

impl GbtModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.init
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_one(x))
                    .sum::<f64>()
    }
}
