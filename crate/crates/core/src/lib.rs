//! Trajectory prediction with epistemic uncertainty, plus the tooling to
//! measure how the traffic environment shifts prediction error and
//! uncertainty.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: track data model, CSV/JSON ingestion, resampling, windows, splits
//! - [`synthgen`]: parametric intersection scene generator
//! - [`features`]: kinematic, interaction and categorical scenario features
//! - [`predictor`]: constant-velocity baseline and a GRU encoder-decoder with
//!   hand-written backpropagation and Adam
//! - [`ensemble`]: deep ensembles, MC dropout, predictive entropies
//! - [`evaluation`]: ADE/FDE, error-retention curves, AUC, retention scores
//! - [`analysis`]: Spearman correlation and random-forest importance
//! - [`experiment`]: config, cross-dataset protocol, report emission

pub mod analysis;
pub mod dataset;
pub mod ensemble;
pub mod evaluation;
pub mod experiment;
pub mod features;
pub mod geometry;
pub mod predictor;
pub mod synthgen;

#[cfg(test)]
mod testutil;

pub use dataset::{
    AgentType, DatasetSplit, MapSpec, PredictionWindow, Scene, SignalTimeline, Track, TrackPoint,
};
pub use ensemble::EnsemblePrediction;
pub use evaluation::{RetentionCurve, RetentionMode};
pub use features::FeatureVector;
pub use predictor::{ModelParams, Prediction, TrainingConfig};
