//! Random forest regression: bootstrapped trees with per-split feature
//! subsampling, averaged at prediction time.
//!
//! Every tree draws its bootstrap rows and split-time feature subsets from
//! a ChaCha stream seeded by `derive_seed(seed, tree_index)`, so fits are
//! reproducible and independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on, FeatureSampler, TreeModel, TreeParams};
use crate::derive_seed;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features considered at each split (at least one).
    pub feature_frac: f64,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub input_dim: usize,
    pub trees: Vec<TreeModel>,
}

struct SubsetSampler<'a> {
    frac: f64,
    rng: &'a mut ChaCha8Rng,
}

impl FeatureSampler for SubsetSampler<'_> {
    fn sample(&mut self, n_features: usize) -> Vec<usize> {
        let m = ((n_features as f64 * self.frac).ceil() as usize)
            .clamp(1, n_features);
        if m == n_features {
            return (0..n_features).collect();
        }
        // partial Fisher-Yates, then sorted so the split scan stays in
        // ascending feature order for tie-breaking
        let mut pool: Vec<usize> = (0..n_features).collect();
        for i in 0..m {
            let j = self.rng.gen_range(i..n_features);
            pool.swap(i, j);
        }
        let mut chosen = pool[..m].to_vec();
        chosen.sort_unstable();
        chosen
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> ForestModel {
    assert!(params.n_trees >= 1, "need at least one tree");
    assert!(
        params.feature_frac > 0.0 && params.feature_frac <= 1.0,
        "feature_frac must be in (0, 1]"
    );
    let n = x.rows();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    let trees: Vec<TreeModel> = (0..params.n_trees)
        .into_par_iter()
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, m as u64));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut sampler = SubsetSampler {
                frac: params.feature_frac,
                rng: &mut rng,
            };
            fit_tree_on(x, y, &tree_params, &rows, &mut sampler)
        })
        .collect();
    ForestModel {
        input_dim: x.cols(),
        trees,
    }
}

impl ForestModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| t.predict_one(x))
            .sum::<f64>()
            / self.trees.len() as f64
    }
}
