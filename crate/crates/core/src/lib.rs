//! Build-to-order pre-order forecasting.
//!
//! The crate turns raw order-book exports (item, fulfillment period, delivery
//! date, quantity) into dense demand cubes, reshapes them into frontier
//! samples that separate already-revealed pre-orders from future ones, and
//! runs a full model-selection and evaluation pipeline on top:
//!
//! * [`orderbook`] — CSV ingestion, dense cube construction, summaries.
//! * [`diagonal`] — the frontier (triangular) feature/target reshaping,
//!   gross/net differencing, and forecast reassembly.
//! * [`stats`] — Spearman rank correlation and the pooled slot-pair table.
//! * [`models`] — from-scratch regressors (ridge, lasso, k-NN, trees,
//!   random forest, gradient boosting, MLP) behind one fit/predict contract.
//! * [`pipeline`] — target transforms, dev/holdout splits, cross-validated
//!   grid search, and the three training modes.
//! * [`eval`] — SMAPE with two-stage aggregation and report emission.
//! * [`synth`] — synthetic order-book generation with controllable
//!   anticipation and sparsity, used for verification.

pub mod diagonal;
pub mod eval;
pub mod matrix;
pub mod models;
pub mod orderbook;
pub mod pipeline;
pub mod stats;
pub mod synth;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv parse error at line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("negative quantity {quantity} at line {line}")]
    NegativeQuantity { line: u64, quantity: i64 },

    #[error("delivery_date {value} out of range (horizon {horizon}) at line {line}")]
    DeliveryOutOfRange { value: i64, horizon: usize, line: u64 },

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("no records to build a cube from")]
    EmptyRecords,

    #[error("no items survive filter (min non-zero fraction {0})")]
    NoItemsSurvive(f64),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("cube is already differenced (net semantics)")]
    AlreadyDifferenced,

    #[error("cube has net semantics; accumulate it before building frontiers")]
    NetCubeNotAccumulated,

    #[error("dimension mismatch for item `{item}`: expected {expected}, got {got}")]
    DimensionMismatch {
        item: String,
        expected: usize,
        got: usize,
    },

    #[error("prediction layout mismatch: expected {expected} slots, got {got}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("input vectors must have equal length (got {0} and {1})")]
    LengthMismatch(usize, usize),

    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),

    #[error("singular system; use a regularization strength > 0")]
    SingularSystem,

    #[error("k = {k} exceeds the number of training rows {n}")]
    KnnTooFewRows { k: usize, n: usize },

    #[error("model expects {expected} input features, got {got}")]
    InputDimension { expected: usize, got: usize },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("training diverged (non-finite loss); use a smaller step size")]
    Divergence,

    #[error("log transform of negative value {0}")]
    LogOfNegative(f64),

    #[error("min-max transform used before fitting")]
    TransformNotFitted,

    #[error("folds = {folds} exceeds the number of rows {n}")]
    TooManyFolds { folds: usize, n: usize },

    #[error("empty model grid")]
    EmptyGrid,

    #[error("empty feature set: no_df mode requires lags >= 1")]
    EmptyFeatureSet,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite prediction from {method} at row {row}, slot {slot}")]
    NonFinitePrediction {
        method: String,
        row: usize,
        slot: usize,
    },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Derives a child seed from a base seed and a stable task index, so that
/// parallel work items get independent streams regardless of scheduling.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
