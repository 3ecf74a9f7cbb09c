//! The plain-text (TOML) configuration file consumed by `btof train`.
//! `btof config --defaults` prints a fully-populated copy of it.

use serde::{Deserialize, Serialize};

use btof_core::models::{ModelSpec, Weighting};
use btof_core::orderbook::Semantics;
use btof_core::pipeline::{CvScheme, ExperimentConfig, Mode, TransformKind};

fn default_semantics() -> Semantics {
    Semantics::Gross
}
fn default_horizon() -> usize {
    4
}
fn default_min_nonzero_frac() -> f64 {
    0.6
}
fn default_threads() -> usize {
    1
}
fn default_mode() -> Mode {
    Mode::DfAllItems
}
fn default_transform() -> TransformKind {
    TransformKind::Log
}
fn default_dev_periods() -> usize {
    37
}
fn default_holdout_periods() -> usize {
    8
}
fn default_folds() -> usize {
    10
}
fn default_cv_scheme() -> CvScheme {
    CvScheme::Blocked
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Order-book CSV to train on.
    pub input: String,
    /// Directory for the report, score tables, and model files.
    pub out_dir: String,
    #[serde(default = "default_semantics")]
    pub semantics: Semantics,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Items must have at least this fraction of non-zero periods.
    #[serde(default = "default_min_nonzero_frac")]
    pub min_nonzero_frac: f64,
    /// Worker thread cap; 1 is the bitwise-reproducibility reference and
    /// higher counts must produce identical outputs.
    #[serde(default = "default_threads")]
    pub threads: usize,

    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_transform")]
    pub transform: TransformKind,
    #[serde(default)]
    pub differenced: bool,
    #[serde(default = "default_dev_periods")]
    pub dev_periods: usize,
    #[serde(default = "default_holdout_periods")]
    pub holdout_periods: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_cv_scheme")]
    pub cv_scheme: CvScheme,
    /// Lag depth; omitted means 1 for the frontier modes and 6 for no_df.
    #[serde(default)]
    pub lags: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: Vec<ModelSpec>,
}

impl TrainConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            transform: self.transform,
            differenced: self.differenced,
            grid: self.grid.clone(),
            dev_periods: self.dev_periods,
            holdout_periods: self.holdout_periods,
            folds: self.folds,
            cv_scheme: self.cv_scheme,
            lags: self.lags,
            seed: self.seed,
        }
    }

    pub fn defaults() -> Self {
        Self {
            input: "orders.csv".into(),
            out_dir: "run".into(),
            semantics: default_semantics(),
            horizon: default_horizon(),
            min_nonzero_frac: default_min_nonzero_frac(),
            threads: default_threads(),
            mode: default_mode(),
            transform: default_transform(),
            differenced: false,
            dev_periods: default_dev_periods(),
            holdout_periods: default_holdout_periods(),
            folds: default_folds(),
            cv_scheme: default_cv_scheme(),
            lags: None,
            seed: 0,
            grid: default_grid(),
        }
    }
}

/// The stock grid: small, standard, desk-scale sweeps per family.
pub fn default_grid() -> Vec<ModelSpec> {
    let mut grid = Vec::new();
    for lambda in [0.01, 0.1, 1.0, 10.0] {
        grid.push(ModelSpec::Ridge {
            lambda,
            intercept: true,
        });
    }
    for lambda in [0.01, 0.1, 1.0, 10.0] {
        grid.push(ModelSpec::Lasso {
            lambda,
            tol: 1e-7,
            max_iter: 10_000,
        });
    }
    for k in [1, 3, 5, 10] {
        grid.push(ModelSpec::Knn {
            k,
            weighting: Weighting::Uniform,
        });
    }
    for max_depth in [2, 3, 5] {
        grid.push(ModelSpec::Tree {
            max_depth,
            min_leaf: 1,
        });
    }
    for n_trees in [100, 500] {
        grid.push(ModelSpec::RandomForest {
            n_trees,
            max_depth: 5,
            min_leaf: 1,
            feature_frac: 1.0 / 3.0,
            bootstrap: true,
            seed: None,
        });
    }
    for n_trees in [100, 500] {
        for learning_rate in [0.05, 0.1] {
            grid.push(ModelSpec::Gbt {
                n_trees,
                learning_rate,
                max_depth: 3,
                min_leaf: 1,
                seed: None,
            });
        }
    }
    for epochs in [50, 200] {
        grid.push(ModelSpec::Mlp {
            hidden: vec![80, 20],
            activation: Default::default(),
            epochs,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            seed: None,
        });
    }
    grid
}
