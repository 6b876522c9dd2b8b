//! End-to-end runs: configuration, the train-on-i / test-on-j protocol and
//! report emission.

mod config;
mod pipeline;
mod report;
mod svg;

use thiserror::Error;

pub use config::{DatasetSource, ExperimentConfig, UncertaintyMeasure};
pub use pipeline::{
    build_datasets, evaluate_windows, prepare_dataset, read_eval_csv, retention_from_eval, run_cross_dataset,
    train_members, write_eval_csv, CrossMatrix, CrossRun, EvalRow, Predictor, PreparedDataset, WindowEval,
};
pub use report::{
    add_analysis, add_retention, emit_report, performance_rows, write_matrix_csv, FileEntry, Manifest, MANIFEST_FILE,
};
pub use svg::{heatmap_svg, line_plot_svg, Series};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Synth(#[from] crate::synthgen::SynthError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Model(#[from] crate::predictor::ModelError),
    #[error(transparent)]
    Eval(#[from] crate::evaluation::EvalError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("training member {member} on dataset {dataset} failed: {source}")]
    Training { dataset: usize, member: usize, source: crate::predictor::ModelError },
    #[error("dataset {name}: {reason}")]
    Insufficient { name: String, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
