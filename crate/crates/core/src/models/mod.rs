//! Regressor families behind a single fit/predict contract.
//!
//! Multi-output targets are handled as independent per-target models: a
//! [`MultiOutputModel`] holds one fitted regressor per target slot. All
//! randomness flows from the run seed through per-task derived seeds, so
//! fits are reproducible regardless of scheduling.

pub mod forest;
pub mod gbt;
pub mod knn;
pub mod lasso;
pub mod mlp;
pub mod ridge;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{derive_seed, Error, Result};

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use gbt::{fit_gbt, GbtModel, GbtParams};
pub use knn::{fit_knn, KnnModel, Weighting};
pub use lasso::{fit_lasso, LassoModel};
pub use mlp::{fit_mlp, Activation, MlpModel, Network};
pub use ridge::{fit_ridge, RidgeModel};
pub use tree::{fit_tree, Node, TreeModel, TreeParams};

fn default_lambda() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_lasso_tol() -> f64 {
    1e-7
}
fn default_lasso_max_iter() -> usize {
    10_000
}
fn default_k() -> usize {
    5
}
fn default_tree_depth() -> usize {
    3
}
fn default_min_leaf() -> usize {
    1
}
fn default_forest_trees() -> usize {
    100
}
fn default_forest_depth() -> usize {
    5
}
fn default_feature_frac() -> f64 {
    1.0 / 3.0
}
fn default_gbt_trees() -> usize {
    500
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_hidden() -> Vec<usize> {
    vec![80, 20]
}
fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    32
}
fn default_step() -> f64 {
    1e-3
}
fn default_momentum() -> f64 {
    0.9
}

/// Declarative hyperparameter bundle for one regressor family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Ridge {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_true")]
        intercept: bool,
    },
    Lasso {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_lasso_tol")]
        tol: f64,
        #[serde(default = "default_lasso_max_iter")]
        max_iter: usize,
    },
    Knn {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        weighting: Weighting,
    },
    Tree {
        #[serde(default = "default_tree_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    RandomForest {
        #[serde(default = "default_forest_trees")]
        n_trees: usize,
        #[serde(default = "default_forest_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        #[serde(default = "default_feature_frac")]
        feature_frac: f64,
        #[serde(default = "default_true")]
        bootstrap: bool,
        #[serde(default)]
        seed: Option<u64>,
    },
    Gbt {
        #[serde(default = "default_gbt_trees")]
        n_trees: usize,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_tree_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        activation: Activation,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_batch")]
        batch_size: usize,
        #[serde(default = "default_step")]
        learning_rate: f64,
        #[serde(default = "default_momentum")]
        momentum: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Lasso { .. } => "lasso",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::RandomForest { .. } => "random_forest",
            ModelSpec::Gbt { .. } => "gbt",
            ModelSpec::Mlp { .. } => "mlp",
        }
    }

    /// Explicit per-spec seed, when the spec pins one.
    pub fn seed_override(&self) -> Option<u64> {
        match self {
            ModelSpec::RandomForest { seed, .. }
            | ModelSpec::Gbt { seed, .. }
            | ModelSpec::Mlp { seed, .. } => *seed,
            _ => None,
        }
    }

    /// Checks the documented hyperparameter ranges.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidHyperparameter(msg));
        match self {
            ModelSpec::Ridge { lambda, .. } => {
                if *lambda < 0.0 {
                    return fail(format!("ridge lambda must be >= 0, got {lambda}"));
                }
            }
            ModelSpec::Lasso {
                lambda,
                tol,
                max_iter,
            } => {
                if *lambda < 0.0 {
                    return fail(format!("lasso lambda must be >= 0, got {lambda}"));
                }
                if *tol <= 0.0 {
                    return fail(format!("lasso tol must be > 0, got {tol}"));
                }
                if *max_iter == 0 {
                    return fail("lasso max_iter must be >= 1".into());
                }
            }
            ModelSpec::Knn { k, .. } => {
                if *k == 0 {
                    return fail("knn k must be >= 1".into());
                }
            }
            ModelSpec::Tree { min_leaf, .. } => {
                if *min_leaf == 0 {
                    return fail("tree min_leaf must be >= 1".into());
                }
            }
            ModelSpec::RandomForest {
                n_trees,
                feature_frac,
                min_leaf,
                ..
            } => {
                if *n_trees == 0 {
                    return fail("random_forest n_trees must be >= 1".into());
                }
                if *min_leaf == 0 {
                    return fail("random_forest min_leaf must be >= 1".into());
                }
                if !(*feature_frac > 0.0 && *feature_frac <= 1.0) {
                    return fail(format!(
                        "random_forest feature_frac must be in (0, 1], got {feature_frac}"
                    ));
                }
            }
            ModelSpec::Gbt {
                n_trees,
                learning_rate,
                min_leaf,
                ..
            } => {
                if *n_trees == 0 {
                    return fail("gbt n_trees must be >= 1".into());
                }
                if *min_leaf == 0 {
                    return fail("gbt min_leaf must be >= 1".into());
                }
                if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    return fail(format!(
                        "gbt learning_rate must be in (0, 1], got {learning_rate}"
                    ));
                }
            }
            ModelSpec::Mlp {
                epochs,
                batch_size,
                learning_rate,
                momentum,
                ..
            } => {
                if *epochs == 0 {
                    return fail("mlp epochs must be >= 1".into());
                }
                if *batch_size == 0 {
                    return fail("mlp batch_size must be >= 1".into());
                }
                if *learning_rate <= 0.0 {
                    return fail(format!("mlp learning_rate must be > 0, got {learning_rate}"));
                }
                if !(0.0..1.0).contains(momentum) {
                    return fail(format!("mlp momentum must be in [0, 1), got {momentum}"));
                }
            }
        }
        Ok(())
    }
}

/// Uniform prediction contract over a single trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedRegressor {
    Ridge(RidgeModel),
    Lasso(LassoModel),
    Knn(KnnModel),
    Tree(TreeModel),
    RandomForest(ForestModel),
    Gbt(GbtModel),
    Mlp(MlpModel),
}

impl FittedRegressor {
    pub fn input_dim(&self) -> usize {
        match self {
            FittedRegressor::Ridge(m) => m.input_dim,
            FittedRegressor::Lasso(m) => m.input_dim,
            FittedRegressor::Knn(m) => m.train_x.cols(),
            FittedRegressor::Tree(m) => m.input_dim,
            FittedRegressor::RandomForest(m) => m.input_dim,
            FittedRegressor::Gbt(m) => m.input_dim,
            FittedRegressor::Mlp(m) => m.input_dim,
        }
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::InputDimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(match self {
            FittedRegressor::Ridge(m) => m.predict_one(x),
            FittedRegressor::Lasso(m) => m.predict_one(x),
            FittedRegressor::Knn(m) => m.predict_one(x),
            FittedRegressor::Tree(m) => m.predict_one(x),
            FittedRegressor::RandomForest(m) => m.predict_one(x),
            FittedRegressor::Gbt(m) => m.predict_one(x),
            FittedRegressor::Mlp(m) => m.predict_one(x),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.rows() == 0 {
            return Ok(Vec::new());
        }
        x.row_iter().map(|row| self.predict_one(row)).collect()
    }
}

/// Fits one regressor; `seed` is the fully-resolved stream seed for this
/// task (per-spec overrides already applied by the caller).
pub(crate) fn fit_seeded(
    spec: &ModelSpec,
    x: &Matrix,
    y: &[f64],
    seed: u64,
) -> Result<FittedRegressor> {
    spec.validate()?;
    Ok(match spec {
        ModelSpec::Ridge { lambda, intercept } => {
            FittedRegressor::Ridge(fit_ridge(x, y, *lambda, *intercept)?)
        }
        ModelSpec::Lasso {
            lambda,
            tol,
            max_iter,
        } => FittedRegressor::Lasso(fit_lasso(x, y, *lambda, *tol, *max_iter)),
        ModelSpec::Knn { k, weighting } => FittedRegressor::Knn(fit_knn(x, y, *k, *weighting)?),
        ModelSpec::Tree {
            max_depth,
            min_leaf,
        } => FittedRegressor::Tree(fit_tree(
            x,
            y,
            &TreeParams {
                max_depth: *max_depth,
                min_leaf: *min_leaf,
            },
        )),
        ModelSpec::RandomForest {
            n_trees,
            max_depth,
            min_leaf,
            feature_frac,
            bootstrap,
            ..
        } => FittedRegressor::RandomForest(fit_forest(
            x,
            y,
            &ForestParams {
                n_trees: *n_trees,
                max_depth: *max_depth,
                min_leaf: *min_leaf,
                feature_frac: *feature_frac,
                bootstrap: *bootstrap,
            },
            seed,
        )),
        ModelSpec::Gbt {
            n_trees,
            learning_rate,
            max_depth,
            min_leaf,
            ..
        } => FittedRegressor::Gbt(fit_gbt(
            x,
            y,
            &GbtParams {
                n_trees: *n_trees,
                learning_rate: *learning_rate,
                max_depth: *max_depth,
                min_leaf: *min_leaf,
            },
        )),
        ModelSpec::Mlp {
            hidden,
            activation,
            epochs,
            batch_size,
            learning_rate,
            momentum,
            ..
        } => FittedRegressor::Mlp(fit_mlp(
            x,
            y,
            hidden,
            *activation,
            *epochs,
            *batch_size,
            *learning_rate,
            *momentum,
            seed,
        )?),
    })
}

/// Fits a single-target regressor. A seed pinned on the spec overrides the
/// run seed.
pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[f64], seed: u64) -> Result<FittedRegressor> {
    fit_seeded(spec, x, y, spec.seed_override().unwrap_or(seed))
}

/// One independently fitted regressor per target slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiOutputModel {
    pub spec: ModelSpec,
    pub targets: Vec<FittedRegressor>,
}

impl MultiOutputModel {
    /// Fits one model per target column; target `i` draws from
    /// `derive_seed(base, i)`, so the per-target fits can run in parallel
    /// without affecting results.
    pub fn fit(spec: &ModelSpec, x: &Matrix, y: &Matrix, seed: u64) -> Result<Self> {
        assert_eq!(x.rows(), y.rows(), "design and target row counts differ");
        let base = spec.seed_override().unwrap_or(seed);
        let targets: Result<Vec<FittedRegressor>> = (0..y.cols())
            .into_par_iter()
            .map(|j| {
                let column = y.column(j);
                fit_seeded(spec, x, &column, derive_seed(base, j as u64))
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            targets: targets?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.targets.len()
    }

    pub fn input_dim(&self) -> usize {
        self.targets.first().map_or(0, FittedRegressor::input_dim)
    }

    /// Predicts all target slots; output columns follow the target slot
    /// order the model was fitted with.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let k = self.targets.len();
        if x.rows() == 0 {
            return Ok(Matrix::zeros(0, k));
        }
        let columns: Result<Vec<Vec<f64>>> =
            self.targets.iter().map(|m| m.predict(x)).collect();
        let columns = columns?;
        let mut out = Matrix::zeros(x.rows(), k);
        for (j, col) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                out.set(r, j, *v);
            }
        }
        Ok(out)
    }
}
