//! How scenario features relate to prediction error and uncertainty:
//! Spearman rank correlation and random-forest importance.

mod forest;
mod report;
mod spearman;

use thiserror::Error;

pub use forest::{feature_importance, fit_forest, forest_predict, oob_r2, ForestConfig, ForestModel, Node, Tree};
pub use report::{
    category_summary, correlation_report, importance_report, write_category_csv, write_correlation_csv,
    write_importance_csv, CategorySummary, CorrelationReport, ImportanceReport, PerformanceRow, METRIC_NAMES,
};
pub use spearman::{spearman, RankVector};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("constant input: correlation undefined")]
    ConstantInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forest has no internal nodes")]
    NoSplits,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("rows are not aligned: {0}")]
    Misaligned(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
