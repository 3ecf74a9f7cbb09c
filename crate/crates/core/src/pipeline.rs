//! Experiment pipeline: target transforms, leakage-safe dev/holdout
//! splitting, cross-validated grid search, and the three training modes
//! (per-item lag features, per-item frontiers, pooled frontiers).
//!
//! Every fit inside a run draws its seed from the run seed through stable
//! task indices, and parallel results are reduced in a fixed order, so a
//! run is byte-reproducible at any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagonal::{
    build_frontiers, difference, Dataset, FrontierSample, Layout, RowKey,
};
use crate::eval::{
    postprocess_forecast, smape_point, ChosenSpec, CvRow, EvalReport, MethodReport, SmapeTensor,
};
use crate::matrix::Matrix;
use crate::models::{ModelSpec, MultiOutputModel};
use crate::orderbook::{CubeData, DemandCube, Semantics};
use crate::{derive_seed, Error, Result};

pub const REPORT_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;

/// Name of the always-included baseline method row.
pub const NAIVE_METHOD: &str = "naive_last";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NoDf,
    DfOneByOne,
    DfAllItems,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::NoDf => "no_df",
            Mode::DfOneByOne => "df_one_by_one",
            Mode::DfAllItems => "df_all_items",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Log,
    Minmax,
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TransformKind::Identity => "identity",
            TransformKind::Log => "log",
            TransformKind::Minmax => "minmax",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScheme {
    /// Contiguous, time-ordered folds; the default, to limit temporal
    /// leakage inside the development set.
    Blocked,
    /// Seeded permutation, then equal chunks.
    Shuffled,
}

/// Fitted target transform. The log transform is `log(1 + v)` because the
/// volumes are full of zeros; min-max statistics come from development rows
/// only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformState {
    pub kind: TransformKind,
    /// Per-target (min, max); `None` until fitted (only min-max needs it).
    pub minmax: Option<Vec<(f64, f64)>>,
}

impl TransformState {
    pub fn unfitted(kind: TransformKind) -> Self {
        Self { kind, minmax: None }
    }

    pub fn fit(kind: TransformKind, y: &Matrix) -> Result<Self> {
        let minmax = match kind {
            TransformKind::Identity | TransformKind::Log => None,
            TransformKind::Minmax => {
                let mut stats = Vec::with_capacity(y.cols());
                for c in 0..y.cols() {
                    let col = y.column(c);
                    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    stats.push((min, max));
                }
                Some(stats)
            }
        };
        Ok(Self { kind, minmax })
    }

    pub fn apply(&self, y: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(y.rows(), y.cols());
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                let v = y.get(r, c);
                let mapped = match self.kind {
                    TransformKind::Identity => v,
                    TransformKind::Log => {
                        if v < 0.0 {
                            return Err(Error::LogOfNegative(v));
                        }
                        v.ln_1p()
                    }
                    TransformKind::Minmax => {
                        let stats = self.minmax.as_ref().ok_or(Error::TransformNotFitted)?;
                        let (min, max) = stats[c];
                        if max > min {
                            (v - min) / (max - min)
                        } else {
                            0.0
                        }
                    }
                };
                out.set(r, c, mapped);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, y: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(y.rows(), y.cols());
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                let v = y.get(r, c);
                let mapped = match self.kind {
                    TransformKind::Identity => v,
                    TransformKind::Log => v.exp_m1(),
                    TransformKind::Minmax => {
                        let stats = self.minmax.as_ref().ok_or(Error::TransformNotFitted)?;
                        let (min, max) = stats[c];
                        min + v * (max - min)
                    }
                };
                out.set(r, c, mapped);
            }
        }
        Ok(out)
    }
}

/// Frontiers split into development and holdout, with boundary-straddling
/// frontiers (targets leaking past the development window) dropped.
pub struct Split {
    pub dev: Vec<FrontierSample>,
    pub holdout: Vec<FrontierSample>,
    pub dropped: usize,
}

/// The holdout owns every frontier whose earliest target period falls in
/// the last `holdout_periods` periods; development keeps frontiers whose
/// targets stay inside the first `dev_periods` periods and off the holdout.
pub fn split_dev_holdout(
    samples: &[FrontierSample],
    first_period: i64,
    last_period: i64,
    horizon: usize,
    dev_periods: usize,
    holdout_periods: usize,
) -> Split {
    let holdout_start = last_period - holdout_periods as i64 + 1;
    let dev_limit = (first_period + dev_periods as i64 - 1).min(holdout_start - 1);
    let mut dev = Vec::new();
    let mut holdout = Vec::new();
    let mut dropped = 0;
    for s in samples {
        let last_target = s.t + horizon as i64;
        if holdout_periods > 0 && s.t + 1 >= holdout_start {
            holdout.push(s.clone());
        } else if last_target <= dev_limit {
            dev.push(s.clone());
        } else {
            dropped += 1;
        }
    }
    dev.sort_by_key(|s| s.t);
    holdout.sort_by_key(|s| s.t);
    Split {
        dev,
        holdout,
        dropped,
    }
}

/// Assigns a fold id to each position of an ordered sequence; fold sizes
/// differ by at most one.
pub fn kfold_indices(n: usize, folds: usize, scheme: CvScheme, seed: u64) -> Result<Vec<usize>> {
    if folds > n {
        return Err(Error::TooManyFolds { folds, n });
    }
    assert!(folds >= 1, "folds must be at least 1");
    let base = n / folds;
    let extra = n % folds;
    let mut chunked = Vec::with_capacity(n);
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        chunked.extend(std::iter::repeat_n(fold, size));
    }
    match scheme {
        CvScheme::Blocked => Ok(chunked),
        CvScheme::Shuffled => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut positions: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                positions.swap(i, j);
            }
            let mut assignment = vec![0; n];
            for (chunk_pos, &seq_pos) in positions.iter().enumerate() {
                assignment[seq_pos] = chunked[chunk_pos];
            }
            Ok(assignment)
        }
    }
}

/// Outcome of one cross-validated grid search.
#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: ModelSpec,
    pub best_score: Option<f64>,
    pub table: Vec<CvRow>,
}

/// Scores every spec by mean cross-validated SMAPE on the original scale
/// (inverse transform plus integer postprocessing before scoring) and
/// returns the argmin, ties broken by earlier grid position. A spec whose
/// fit fails on every fold scores +inf and stays in the table.
pub fn grid_search(
    dataset: &Dataset,
    grid: &[ModelSpec],
    folds: usize,
    transform: TransformKind,
    scheme: CvScheme,
    seed: u64,
    scope: &str,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = dataset.x.rows();
    if folds > n {
        return Err(Error::TooManyFolds { folds, n });
    }

    // time-ordered sequence for fold assignment
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (dataset.rows[i].t, i));
    let assignment = kfold_indices(n, folds, scheme, derive_seed(seed, 0))?;
    let mut fold_of_row = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of_row[row] = assignment[pos];
    }

    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|s| (0..folds).map(move |f| (s, f)))
        .collect();

    let scores: Vec<Option<f64>> = tasks
        .par_iter()
        .map(|&(spec_idx, fold)| {
            let task_seed = derive_seed(seed, 1 + (spec_idx * folds + fold) as u64);
            let train_rows: Vec<usize> =
                (0..n).filter(|&i| fold_of_row[i] != fold).collect();
            let val_rows: Vec<usize> = (0..n).filter(|&i| fold_of_row[i] == fold).collect();
            if train_rows.is_empty() || val_rows.is_empty() {
                return None;
            }
            cv_fold_score(
                dataset,
                &grid[spec_idx],
                &train_rows,
                &val_rows,
                transform,
                task_seed,
            )
            .ok()
        })
        .collect();

    let mut table = Vec::with_capacity(grid.len());
    for (spec_idx, spec) in grid.iter().enumerate() {
        let fold_scores: Vec<Option<f64>> =
            scores[spec_idx * folds..(spec_idx + 1) * folds].to_vec();
        let ok: Vec<f64> = fold_scores.iter().flatten().copied().collect();
        let failed_folds = folds - ok.len();
        let mean_score = if ok.is_empty() {
            None
        } else {
            Some(ok.iter().sum::<f64>() / ok.len() as f64)
        };
        table.push(CvRow {
            scope: scope.to_string(),
            spec: spec.clone(),
            fold_scores,
            mean_score,
            failed_folds,
        });
    }

    let mut best_idx = 0;
    let mut best_value = f64::INFINITY;
    for (i, row) in table.iter().enumerate() {
        let value = row.mean_score.unwrap_or(f64::INFINITY);
        if value < best_value {
            best_value = value;
            best_idx = i;
        }
    }
    Ok(GridSearchResult {
        best: grid[best_idx].clone(),
        best_score: table[best_idx].mean_score,
        table,
    })
}

fn cv_fold_score(
    dataset: &Dataset,
    spec: &ModelSpec,
    train_rows: &[usize],
    val_rows: &[usize],
    transform: TransformKind,
    seed: u64,
) -> Result<f64> {
    let x_train = dataset.x.take_rows(train_rows);
    let y_train = dataset.y.take_rows(train_rows);
    let state = TransformState::fit(transform, &y_train)?;
    let y_fit = state.apply(&y_train)?;
    let model = MultiOutputModel::fit(spec, &x_train, &y_fit, seed)?;
    let x_val = dataset.x.take_rows(val_rows);
    let raw = model.predict(&x_val)?;
    let predictions = postprocess_forecast(&state.invert(&raw)?, spec.family())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (pos, &row) in val_rows.iter().enumerate() {
        for c in 0..dataset.y.cols() {
            total += smape_point(dataset.y.get(row, c), predictions.get(pos, c));
            count += 1;
        }
    }
    Ok(total / count as f64)
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

/// Everything one experiment run needs besides the cube itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub transform: TransformKind,
    #[serde(default)]
    pub differenced: bool,
    pub grid: Vec<ModelSpec>,
    #[serde(default = "default_dev_periods")]
    pub dev_periods: usize,
    #[serde(default = "default_holdout_periods")]
    pub holdout_periods: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_cv_scheme")]
    pub cv_scheme: CvScheme,
    /// Lag depth; defaults per mode (1 for frontier modes, 6 for the lag
    /// feature set of `no_df`).
    #[serde(default)]
    pub lags: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn effective_lags(&self) -> usize {
        self.lags.unwrap_or(match self.mode {
            Mode::NoDf => 6,
            _ => 1,
        })
    }

    pub fn validate(&self, n_periods: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for spec in &self.grid {
            spec.validate()?;
        }
        if self.dev_periods + self.holdout_periods > n_periods {
            return Err(Error::InvalidConfig(format!(
                "dev + holdout periods ({} + {}) exceed the {} available",
                self.dev_periods, self.holdout_periods, n_periods
            )));
        }
        if self.mode == Mode::NoDf && self.effective_lags() == 0 {
            return Err(Error::EmptyFeatureSet);
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Feature labels for the `no_df` lag-feature set.
pub fn nodf_labels(horizon: usize, lags: usize) -> Vec<String> {
    let mut labels = Vec::new();
    for lag in 1..=lags {
        for h in 0..horizon {
            labels.push(format!("lag{lag}_h{h}"));
        }
    }
    for h in 0..horizon {
        labels.push(format!("rollmean3_h{h}"));
    }
    labels.push("period_index".to_string());
    labels
}

/// Lag-feature samples for the `no_df` mode: lagged full rows, a 3-period
/// rolling mean per delivery date, and the period index. Targets keep the
/// frontier layout so scores are comparable across modes.
pub fn build_nodf_samples(data: &CubeData, item: usize, lags: usize) -> Vec<FrontierSample> {
    assert!(lags >= 1, "no_df needs at least one lag");
    let horizon = data.horizon();
    let layout = Layout::new(horizon, 0);
    let y_slots = layout.y_slots();
    let history = lags.max(3) as i64;
    let first = data.first_period() + history;
    let last = data.last_period() - horizon as i64;
    let mut samples = Vec::new();
    for t in first..=last {
        let mut x = Vec::with_capacity(lags * horizon + horizon + 1);
        for lag in 1..=lags as i64 {
            for h in 0..horizon {
                x.push(data.get(item, t - lag, h) as f64);
            }
        }
        for h in 0..horizon {
            let sum: i64 = (1..=3).map(|lag| data.get(item, t - lag, h)).sum();
            x.push(sum as f64 / 3.0);
        }
        x.push(t as f64);
        let y = y_slots
            .iter()
            .map(|s| data.get(item, t + s.period_offset, s.delivery) as f64)
            .collect();
        samples.push(FrontierSample {
            item: data.items()[item].clone(),
            t,
            x,
            y,
        });
    }
    samples
}

/// A trained model plus the fitted transform it must be inverted with,
/// bound to the scope it was fitted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopedModel {
    /// `*` for a pooled fit, otherwise the item code.
    pub scope: String,
    pub transform: TransformState,
    pub model: MultiOutputModel,
}

/// Self-contained, versioned model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub version: u32,
    pub family: String,
    pub mode: Mode,
    pub differenced: bool,
    pub horizon: usize,
    pub lags: usize,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    pub entries: Vec<ScopedModel>,
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::ModelFormat("missing version field".into()))?;
        if version != MODEL_VERSION as u64 {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {version} (supported: {MODEL_VERSION})"
            )));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn entry(&self, scope: &str) -> Option<&ScopedModel> {
        self.entries.iter().find(|e| e.scope == scope)
    }
}

/// A recorded non-fatal failure (the run continues without that scope).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub scope: String,
    pub method: String,
    pub error: String,
}

/// Report plus the trained per-family models.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub models: Vec<SavedModel>,
    pub failures: Vec<RunFailure>,
}

struct ItemData {
    item: String,
    dev: Vec<FrontierSample>,
    holdout: Vec<FrontierSample>,
}

/// Runs a full experiment: samples, split, per-family model selection,
/// holdout evaluation, naive baseline, report.
pub fn run_experiment(config: &ExperimentConfig, cube: &DemandCube) -> Result<ExperimentOutput> {
    if cube.semantics != Semantics::Gross {
        return Err(Error::NetCubeNotAccumulated);
    }
    config.validate(cube.data.n_periods())?;

    let lags = config.effective_lags();
    let working: CubeData = if config.differenced {
        difference(cube)?.data
    } else {
        cube.data.clone()
    };
    let horizon = working.horizon();
    let layout = Layout::new(horizon, if config.mode == Mode::NoDf { 0 } else { lags });
    let x_labels = match config.mode {
        Mode::NoDf => nodf_labels(horizon, lags),
        _ => layout.x_labels(),
    };
    let y_labels = layout.y_labels();

    // per-item samples and splits; items without both dev and holdout
    // frontiers are excluded up front
    let mut items: Vec<ItemData> = Vec::new();
    let mut failures: Vec<RunFailure> = Vec::new();
    for i in 0..working.items().len() {
        let samples = match config.mode {
            Mode::NoDf => build_nodf_samples(&working, i, lags),
            _ => build_frontiers(&working, i, lags),
        };
        let split = split_dev_holdout(
            &samples,
            working.first_period(),
            working.last_period(),
            horizon,
            config.dev_periods,
            config.holdout_periods,
        );
        let item = working.items()[i].clone();
        if split.dev.is_empty() || split.holdout.is_empty() {
            log::warn!(
                "item `{item}` excluded: {} dev / {} holdout frontiers",
                split.dev.len(),
                split.holdout.len()
            );
            failures.push(RunFailure {
                scope: item,
                method: "split".into(),
                error: "no usable dev/holdout frontiers".into(),
            });
            continue;
        }
        items.push(ItemData {
            item,
            dev: split.dev,
            holdout: split.holdout,
        });
    }
    if items.is_empty() {
        return Err(Error::InvalidConfig(
            "no items with usable dev and holdout frontiers".into(),
        ));
    }

    // family sub-grids in first-appearance order
    let mut families: Vec<(&'static str, Vec<ModelSpec>)> = Vec::new();
    for spec in &config.grid {
        match families.iter_mut().find(|(f, _)| *f == spec.family()) {
            Some((_, specs)) => specs.push(spec.clone()),
            None => families.push((spec.family(), vec![spec.clone()])),
        }
    }

    let item_names: Vec<String> = items.iter().map(|d| d.item.clone()).collect();
    let mut methods: Vec<MethodReport> = Vec::new();
    let mut models: Vec<SavedModel> = Vec::new();

    match config.mode {
        Mode::DfAllItems => {
            let dev_groups: Vec<(String, Vec<FrontierSample>)> = items
                .iter()
                .map(|d| (d.item.clone(), d.dev.clone()))
                .collect();
            let holdout_groups: Vec<(String, Vec<FrontierSample>)> = items
                .iter()
                .map(|d| (d.item.clone(), d.holdout.clone()))
                .collect();
            let dev = pool_with_labels(&dev_groups, &x_labels, &y_labels)?;
            let holdout = pool_with_labels(&holdout_groups, &x_labels, &y_labels)?;

            for (family_idx, (family, sub_grid)) in families.iter().enumerate() {
                let family_seed = derive_seed(config.seed, family_idx as u64);
                let search = grid_search(
                    &dev,
                    sub_grid,
                    config.folds,
                    config.transform,
                    config.cv_scheme,
                    derive_seed(family_seed, 0),
                    "*",
                )?;
                let state = TransformState::fit(config.transform, &dev.y)?;
                let y_fit = state.apply(&dev.y)?;
                let model = MultiOutputModel::fit(
                    &search.best,
                    &dev.x,
                    &y_fit,
                    derive_seed(family_seed, 1),
                )?;
                let raw = model.predict(&holdout.x)?;
                let predictions = postprocess_forecast(&state.invert(&raw)?, family)?;
                let tensor = tensor_from_pooled(&item_names, &holdout, &predictions);
                methods.push(MethodReport::from_tensor(
                    family.to_string(),
                    vec![ChosenSpec {
                        scope: "*".into(),
                        spec: search.best.clone(),
                        cv_smape: search.best_score,
                    }],
                    search.table,
                    tensor,
                ));
                models.push(SavedModel {
                    version: MODEL_VERSION,
                    family: family.to_string(),
                    mode: config.mode,
                    differenced: config.differenced,
                    horizon,
                    lags,
                    x_labels: x_labels.clone(),
                    y_labels: y_labels.clone(),
                    entries: vec![ScopedModel {
                        scope: "*".into(),
                        transform: state,
                        model,
                    }],
                });
            }
        }
        Mode::DfOneByOne | Mode::NoDf => {
            for (family_idx, (family, sub_grid)) in families.iter().enumerate() {
                type PerItem = (
                    String,
                    std::result::Result<
                        (ChosenSpec, Vec<CvRow>, Vec<Vec<f64>>, MultiOutputModel, TransformState),
                        String,
                    >,
                );
                let per_item: Vec<PerItem> = items
                    .par_iter()
                    .enumerate()
                    .map(|(item_idx, d)| {
                        let item_seed = derive_seed(config.seed, item_idx as u64);
                        let family_item_seed = derive_seed(item_seed, family_idx as u64);
                        let outcome = evaluate_item(
                            d,
                            sub_grid,
                            config,
                            &x_labels,
                            &y_labels,
                            family_item_seed,
                            family,
                        )
                        .map_err(|e| e.to_string());
                        (d.item.clone(), outcome)
                    })
                    .collect();

                let mut chosen = Vec::new();
                let mut cv = Vec::new();
                let mut tensor_items = Vec::new();
                let mut frontiers = Vec::new();
                let mut per_slot: Vec<Vec<Vec<f64>>> = vec![Vec::new(); y_labels.len()];
                let mut entries = Vec::new();
                for (item, outcome) in per_item {
                    match outcome {
                        Ok((pick, rows, scores, model, state)) => {
                            chosen.push(pick);
                            cv.extend(rows);
                            tensor_items.push(item.clone());
                            let d = items.iter().find(|d| d.item == item).unwrap();
                            frontiers.push(d.holdout.iter().map(|s| s.t).collect::<Vec<i64>>());
                            for (j, slot_scores) in scores.into_iter().enumerate() {
                                per_slot[j].push(slot_scores);
                            }
                            entries.push(ScopedModel {
                                scope: item,
                                transform: state,
                                model,
                            });
                        }
                        Err(message) => {
                            log::warn!("item `{item}` failed for {family}: {message}");
                            failures.push(RunFailure {
                                scope: item,
                                method: family.to_string(),
                                error: message,
                            });
                        }
                    }
                }
                if tensor_items.is_empty() {
                    continue;
                }
                let tensor = SmapeTensor {
                    items: tensor_items,
                    frontiers,
                    values: per_slot,
                };
                methods.push(MethodReport::from_tensor(
                    family.to_string(),
                    chosen,
                    cv,
                    tensor,
                ));
                models.push(SavedModel {
                    version: MODEL_VERSION,
                    family: family.to_string(),
                    mode: config.mode,
                    differenced: config.differenced,
                    horizon,
                    lags,
                    x_labels: x_labels.clone(),
                    y_labels: y_labels.clone(),
                    entries,
                });
            }
        }
    }

    // naive last-value baseline straight from the cube: the forecast for
    // target cell (t+p, j) is the current value q[t][j]
    let naive_tensor = naive_baseline_tensor(&working, &items, &layout);
    methods.push(MethodReport::from_tensor(
        NAIVE_METHOD.to_string(),
        Vec::new(),
        Vec::new(),
        naive_tensor,
    ));

    let overall: Vec<f64> = methods.iter().map(|m| m.overall_smape).collect();
    let report = EvalReport {
        version: REPORT_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
        mode: config.mode.to_string(),
        transform: config.transform.to_string(),
        differenced: config.differenced,
        horizon,
        lags,
        dev_periods: config.dev_periods,
        holdout_periods: config.holdout_periods,
        items: item_names,
        slot_labels: y_labels,
        methods,
        median_smape_across_methods: crate::eval::median(&overall),
    };
    Ok(ExperimentOutput {
        report,
        models,
        failures,
    })
}

type ItemFit = (
    ChosenSpec,
    Vec<CvRow>,
    Vec<Vec<f64>>,
    MultiOutputModel,
    TransformState,
);

fn evaluate_item(
    d: &ItemData,
    sub_grid: &[ModelSpec],
    config: &ExperimentConfig,
    x_labels: &[String],
    y_labels: &[String],
    seed: u64,
    family: &str,
) -> Result<ItemFit> {
    let dev_group = vec![(d.item.clone(), d.dev.clone())];
    let holdout_group = vec![(d.item.clone(), d.holdout.clone())];
    let dev = pool_with_labels(&dev_group, x_labels, y_labels)?;
    let holdout = pool_with_labels(&holdout_group, x_labels, y_labels)?;
    let folds = config.folds.min(dev.x.rows());
    if folds < 2 {
        return Err(Error::TooManyFolds {
            folds: config.folds,
            n: dev.x.rows(),
        });
    }
    let search = grid_search(
        &dev,
        sub_grid,
        folds,
        config.transform,
        config.cv_scheme,
        derive_seed(seed, 0),
        &d.item,
    )?;
    let state = TransformState::fit(config.transform, &dev.y)?;
    let y_fit = state.apply(&dev.y)?;
    let model = MultiOutputModel::fit(&search.best, &dev.x, &y_fit, derive_seed(seed, 1))?;
    let raw = model.predict(&holdout.x)?;
    let predictions = postprocess_forecast(&state.invert(&raw)?, family)?;

    let slots = y_labels.len();
    let mut scores: Vec<Vec<f64>> = vec![Vec::with_capacity(holdout.x.rows()); slots];
    for r in 0..holdout.x.rows() {
        for (j, slot_scores) in scores.iter_mut().enumerate() {
            slot_scores.push(smape_point(holdout.y.get(r, j), predictions.get(r, j)));
        }
    }
    Ok((
        ChosenSpec {
            scope: d.item.clone(),
            spec: search.best.clone(),
            cv_smape: search.best_score,
        },
        search.table,
        scores,
        model,
        state,
    ))
}

fn pool_with_labels(
    groups: &[(String, Vec<FrontierSample>)],
    x_labels: &[String],
    y_labels: &[String],
) -> Result<Dataset> {
    let mut x_rows = Vec::new();
    let mut y_rows = Vec::new();
    let mut rows = Vec::new();
    for (item, samples) in groups {
        for s in samples {
            if s.x.len() != x_labels.len() || s.y.len() != y_labels.len() {
                return Err(Error::DimensionMismatch {
                    item: item.clone(),
                    expected: x_labels.len(),
                    got: s.x.len(),
                });
            }
            x_rows.push(s.x.clone());
            y_rows.push(s.y.clone());
            rows.push(RowKey {
                item: item.clone(),
                t: s.t,
            });
        }
    }
    Ok(Dataset {
        x: if x_rows.is_empty() {
            Matrix::zeros(0, x_labels.len())
        } else {
            Matrix::from_rows(&x_rows)
        },
        y: if y_rows.is_empty() {
            Matrix::zeros(0, y_labels.len())
        } else {
            Matrix::from_rows(&y_rows)
        },
        x_labels: x_labels.to_vec(),
        y_labels: y_labels.to_vec(),
        rows,
    })
}

fn tensor_from_pooled(
    item_names: &[String],
    holdout: &Dataset,
    predictions: &Matrix,
) -> SmapeTensor {
    let slots = holdout.y.cols();
    let mut frontiers: Vec<Vec<i64>> = vec![Vec::new(); item_names.len()];
    let mut values: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); item_names.len()]; slots];
    for (r, key) in holdout.rows.iter().enumerate() {
        let item_idx = item_names
            .iter()
            .position(|i| i == &key.item)
            .expect("pooled row item is known");
        frontiers[item_idx].push(key.t);
        for (j, per_item) in values.iter_mut().enumerate() {
            per_item[item_idx].push(smape_point(holdout.y.get(r, j), predictions.get(r, j)));
        }
    }
    SmapeTensor {
        items: item_names.to_vec(),
        frontiers,
        values,
    }
}

fn naive_baseline_tensor(data: &CubeData, items: &[ItemData], layout: &Layout) -> SmapeTensor {
    let y_slots = layout.y_slots();
    let item_names: Vec<String> = items.iter().map(|d| d.item.clone()).collect();
    let mut frontiers = Vec::with_capacity(items.len());
    let mut values: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); items.len()]; y_slots.len()];
    for (item_idx, d) in items.iter().enumerate() {
        let cube_idx = data
            .item_index(&d.item)
            .expect("evaluated item exists in cube");
        frontiers.push(d.holdout.iter().map(|s| s.t).collect::<Vec<i64>>());
        for s in &d.holdout {
            for (j, slot) in y_slots.iter().enumerate() {
                let actual = s.y[j];
                let forecast =
                    crate::eval::postprocess_value(data.get(cube_idx, s.t, slot.delivery) as f64);
                values[j][item_idx].push(smape_point(actual, forecast));
            }
        }
    }
    SmapeTensor {
        items: item_names,
        frontiers,
        values,
    }
}
