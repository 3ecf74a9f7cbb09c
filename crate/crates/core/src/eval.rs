//! SMAPE evaluation with two-stage aggregation and report emission.
//!
//! Point scores live on the [0, 2] scale (`2|A-F| / (|A|+|F|)`, with
//! 0/0 scored as 0 — a perfect forecast of a zero period); percent is a
//! display concern only. Aggregation averages per item over its test
//! frontiers first, then unweighted over items.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::models::ModelSpec;
use crate::{Error, Result};

/// Rounds half away from zero, then clamps at zero.
pub fn postprocess_value(v: f64) -> f64 {
    v.round().max(0.0)
}

/// Integer postprocessing of a raw prediction matrix (original scale).
/// Non-finite predictions fail, naming the model and row.
pub fn postprocess_forecast(raw: &Matrix, method: &str) -> Result<Matrix> {
    let mut out = Matrix::zeros(raw.rows(), raw.cols());
    for r in 0..raw.rows() {
        for c in 0..raw.cols() {
            let v = raw.get(r, c);
            if !v.is_finite() {
                return Err(Error::NonFinitePrediction {
                    method: method.to_string(),
                    row: r,
                    slot: c,
                });
            }
            out.set(r, c, postprocess_value(v));
        }
    }
    Ok(out)
}

/// Symmetric absolute percent error of one point, on the [0, 2] scale.
pub fn smape_point(actual: f64, forecast: f64) -> f64 {
    let denom = actual.abs() + forecast.abs();
    if denom == 0.0 {
        0.0
    } else {
        2.0 * (actual - forecast).abs() / denom
    }
}

/// Per-point scores for one method: `values[slot][item][frontier]`, with
/// the evaluated frontier periods recorded per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmapeTensor {
    pub items: Vec<String>,
    /// Test frontier periods per item, ascending.
    pub frontiers: Vec<Vec<i64>>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl SmapeTensor {
    pub fn slot_count(&self) -> usize {
        self.values.len()
    }
}

/// Two-stage aggregates: `s_ji[slot][item]` is the mean over the item's
/// test frontiers, `s_j[slot]` the unweighted mean over items.
pub fn aggregate(tensor: &SmapeTensor) -> (Vec<Vec<f64>>, Vec<f64>) {
    let s_ji: Vec<Vec<f64>> = tensor
        .values
        .iter()
        .map(|per_item| {
            per_item
                .iter()
                .map(|scores| {
                    assert!(!scores.is_empty(), "item with empty test set in tensor");
                    scores.iter().sum::<f64>() / scores.len() as f64
                })
                .collect()
        })
        .collect();
    let s_j: Vec<f64> = s_ji
        .iter()
        .map(|per_item| per_item.iter().sum::<f64>() / per_item.len() as f64)
        .collect();
    (s_ji, s_j)
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Cross-validation record for one grid spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    /// `*` for pooled fits, the item code for per-item fits.
    pub scope: String,
    pub spec: ModelSpec,
    /// Per-fold mean SMAPE on the original scale; `null` where the fit
    /// failed on that fold.
    pub fold_scores: Vec<Option<f64>>,
    pub mean_score: Option<f64>,
    pub failed_folds: usize,
}

/// The spec selected for one scope (pooled or per item).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenSpec {
    pub scope: String,
    pub spec: ModelSpec,
    pub cv_smape: Option<f64>,
}

/// Holdout results for one method (one model family, or the naive
/// baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub chosen: Vec<ChosenSpec>,
    pub cv: Vec<CvRow>,
    pub smape: SmapeTensor,
    pub s_ji: Vec<Vec<f64>>,
    pub s_j: Vec<f64>,
    /// Mean of `s_j` across slots.
    pub overall_smape: f64,
    /// Median of the `s_ji` entries.
    pub median_smape: f64,
}

impl MethodReport {
    pub fn from_tensor(
        method: String,
        chosen: Vec<ChosenSpec>,
        cv: Vec<CvRow>,
        smape: SmapeTensor,
    ) -> Self {
        let (s_ji, s_j) = aggregate(&smape);
        let overall_smape = s_j.iter().sum::<f64>() / s_j.len() as f64;
        let flat: Vec<f64> = s_ji.iter().flatten().copied().collect();
        let median_smape = median(&flat);
        Self {
            method,
            chosen,
            cv,
            smape,
            s_ji,
            s_j,
            overall_smape,
            median_smape,
        }
    }
}

/// Full evaluation report for one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub mode: String,
    pub transform: String,
    pub differenced: bool,
    pub horizon: usize,
    pub lags: usize,
    pub dev_periods: usize,
    pub holdout_periods: usize,
    pub items: Vec<String>,
    pub slot_labels: Vec<String>,
    pub methods: Vec<MethodReport>,
    /// Median over methods of their overall SMAPE.
    pub median_smape_across_methods: f64,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Recomputes the aggregates from the persisted tensors and checks
    /// they match exactly.
    pub fn verify_aggregates(&self) -> bool {
        self.methods.iter().all(|m| {
            let (s_ji, s_j) = aggregate(&m.smape);
            s_ji == m.s_ji && s_j == m.s_j
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `scores.csv`: one row per (method, slot, item) with the item-level SMAPE.
pub fn write_scores<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "mode", "transform", "slot_j", "item", "smape"])?;
    for m in &report.methods {
        for (j, per_item) in m.s_ji.iter().enumerate() {
            for (item, smape) in m.smape.items.iter().zip(per_item) {
                w.write_record([
                    m.method.as_str(),
                    report.mode.as_str(),
                    report.transform.as_str(),
                    &j.to_string(),
                    item.as_str(),
                    &format!("{smape:.6}"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `summary.csv`: one row per method with the median and per-slot SMAPE.
pub fn write_summary<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "method".to_string(),
        "mode".to_string(),
        "transform".to_string(),
        "median_smape".to_string(),
    ];
    header.extend((0..report.slot_labels.len()).map(|j| format!("smape_slot{j}")));
    w.write_record(&header)?;
    for m in &report.methods {
        let mut rec = vec![
            m.method.clone(),
            report.mode.clone(),
            report.transform.clone(),
            format!("{:.6}", m.median_smape),
        ];
        rec.extend(m.s_j.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
