//! k-nearest-neighbor regression over the stored training set.
//!
//! Euclidean distances, ties broken by lowest training-row index. Inverse
//! distance weighting falls back to averaging exact matches when any
//! selected neighbor sits at distance zero.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub weighting: Weighting,
    pub train_x: Matrix,
    pub train_y: Vec<f64>,
}

pub fn fit_knn(x: &Matrix, y: &[f64], k: usize, weighting: Weighting) -> Result<KnnModel> {
    assert!(k >= 1, "k must be at least 1");
    if k > x.rows() {
        return Err(Error::KnnTooFewRows { k, n: x.rows() });
    }
    Ok(KnnModel {
        k,
        weighting,
        train_x: x.clone(),
        train_y: y.to_vec(),
    })
}

impl KnnModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut neighbors: Vec<(f64, usize)> = self
            .train_x
            .row_iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        neighbors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let selected = &neighbors[..self.k];

        match self.weighting {
            Weighting::Uniform => {
                selected.iter().map(|&(_, i)| self.train_y[i]).sum::<f64>() / self.k as f64
            }
            Weighting::InverseDistance => {
                let exact: Vec<usize> = selected
                    .iter()
                    .filter(|(d, _)| *d == 0.0)
                    .map(|&(_, i)| i)
                    .collect();
                if !exact.is_empty() {
                    return exact.iter().map(|&i| self.train_y[i]).sum::<f64>()
                        / exact.len() as f64;
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(d, i) in selected {
                    let w = 1.0 / d;
                    num += w * self.train_y[i];
                    den += w;
                }
                num / den
            }
        }
    }
}
