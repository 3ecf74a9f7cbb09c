//! Regression tree with greedy variance-reduction splits.
//!
//! Thresholds are midpoints between consecutive distinct feature values;
//! split-gain ties go to the lowest feature index, then the lowest
//! threshold, so fits are fully deterministic. Serves as the base learner
//! for the forest and boosting ensembles.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub input_dim: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl TreeModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Picks the candidate feature indices for one split. The forest plugs in
/// per-split subsampling here; plain trees consider every feature.
pub trait FeatureSampler {
    fn sample(&mut self, n_features: usize) -> Vec<usize>;
}

pub struct AllFeatures;

impl FeatureSampler for AllFeatures {
    fn sample(&mut self, n_features: usize) -> Vec<usize> {
        (0..n_features).collect()
    }
}

pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams) -> TreeModel {
    let idx: Vec<usize> = (0..x.rows()).collect();
    fit_tree_on(x, y, params, &idx, &mut AllFeatures)
}

/// Fits on a row subset (with repetition allowed, for bootstraps) using the
/// given per-split feature sampler.
pub fn fit_tree_on(
    x: &Matrix,
    y: &[f64],
    params: &TreeParams,
    rows: &[usize],
    sampler: &mut dyn FeatureSampler,
) -> TreeModel {
    assert!(!rows.is_empty(), "cannot fit a tree on zero rows");
    let mut nodes = Vec::new();
    build(x, y, params, rows, sampler, 0, &mut nodes);
    TreeModel {
        input_dim: x.cols(),
        nodes,
    }
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn build(
    x: &Matrix,
    y: &[f64],
    params: &TreeParams,
    rows: &[usize],
    sampler: &mut dyn FeatureSampler,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let node_index = nodes.len();
    let n = rows.len();
    if depth >= params.max_depth || n < 2 * params.min_leaf.max(1) {
        nodes.push(Node::Leaf {
            value: mean(y, rows),
        });
        return node_index;
    }

    let features = sampler.sample(x.cols());
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let mut best: Option<BestSplit> = None;

    for &f in &features {
        // stable sort keeps equal-value row order deterministic
        let mut sorted: Vec<usize> = rows.to_vec();
        sorted.sort_by(|&a, &b| {
            x.get(a, f)
                .partial_cmp(&x.get(b, f))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += y[sorted[k - 1]];
            let prev = x.get(sorted[k - 1], f);
            let next = x.get(sorted[k], f);
            if prev == next {
                continue;
            }
            if k < params.min_leaf || n - k < params.min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            // SSE reduction, up to the constant total^2 / n
            let gain = left_sum * left_sum / k as f64
                + right_sum * right_sum / (n - k) as f64
                - total * total / n as f64;
            let better = match &best {
                None => gain > 0.0,
                Some(b) => gain > b.gain,
            };
            if better {
                best = Some(BestSplit {
                    gain,
                    feature: f,
                    threshold: prev + (next - prev) / 2.0,
                });
            }
        }
    }

    match best {
        None => {
            nodes.push(Node::Leaf {
                value: mean(y, rows),
            });
            node_index
        }
        Some(split) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .copied()
                .partition(|&r| x.get(r, split.feature) <= split.threshold);
            nodes.push(Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: 0,
                right: 0,
            });
            let left = build(x, y, params, &left_rows, sampler, depth + 1, nodes);
            let right = build(x, y, params, &right_rows, sampler, depth + 1, nodes);
            if let Node::Split {
                left: l, right: r, ..
            } = &mut nodes[node_index]
            {
                *l = left;
                *r = right;
            }
            node_index
        }
    }
}
