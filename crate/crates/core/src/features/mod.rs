//! Scenario features per prediction window: target kinematics, surrounding
//! participants, and categorical context (type, behaviour, signal
//! compliance, passage stage).

mod categorical;
mod interaction;
mod kinematic;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{PredictionWindow, Scene};

pub use categorical::{
    classify_behavior, classify_compliance, classify_location, net_heading_change, Behavior,
    CategoricalFeatures, Compliance, LocationStage,
};
pub use interaction::{interaction_features, InteractionAtRadius, InteractionFeatures, InteractionParams};
pub use kinematic::{kinematic_features, kinematic_series, KinematicFeatures, KinematicSeries, EPS_DISP};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive time step {0}")]
    BadTimeStep(f64),
    #[error("window {0} does not belong to this scene")]
    ForeignWindow(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub eps_disp: f64,
    #[serde(flatten)]
    pub interaction: InteractionParams,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { eps_disp: EPS_DISP, interaction: InteractionParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub window_id: String,
    pub kinematic: KinematicFeatures,
    pub interaction: InteractionFeatures,
    pub categorical: CategoricalFeatures,
}

fn radius_label(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

impl FeatureVector {
    /// Names of the numeric columns, in table order.
    pub fn numeric_names(radii: &[f64]) -> Vec<String> {
        let mut names: Vec<String> = KinematicFeatures::NAMES.iter().map(|s| s.to_string()).collect();
        for r in radii {
            let x = radius_label(*r);
            names.extend([format!("NTP_{x}"), format!("DTP_{x}"), format!("DCTP_{x}_mean"), format!("DCTP_{x}_max")]);
        }
        names
    }

    pub fn numeric_values(&self) -> Vec<f64> {
        let mut v = self.kinematic.values().to_vec();
        for r in &self.interaction.per_radius {
            v.extend([r.ntp as f64, r.dtp, r.dctp_mean, r.dctp_max]);
        }
        v
    }

    pub const CATEGORICAL_NAMES: [&'static str; 4] = ["agent_type", "behavior", "compliance", "location_stage"];

    pub fn categorical_labels(&self) -> [String; 4] {
        let c = &self.categorical;
        [
            c.agent_type.to_string(),
            c.behavior.as_str().to_string(),
            c.compliance.as_str().to_string(),
            c.location_stage.to_string(),
        ]
    }

    /// Ordinal codes of the categorical features, for tree models.
    pub fn categorical_codes(&self) -> [f64; 4] {
        let c = &self.categorical;
        let agent = crate::dataset::AgentType::ALL.iter().position(|a| *a == c.agent_type).unwrap() as f64;
        [agent, c.behavior.code(), c.compliance.code(), c.location_stage.code()]
    }
}

/// Features of one window of `scene`.
pub fn window_features(
    scene: &Scene,
    window: &PredictionWindow,
    params: &FeatureParams,
) -> Result<FeatureVector, FeatureError> {
    let track = scene
        .track(window.target_track_id)
        .filter(|_| window.scene_id == scene.scene_id)
        .ok_or_else(|| FeatureError::ForeignWindow(window.id()))?;
    Ok(FeatureVector {
        window_id: window.id(),
        kinematic: kinematic_features(window, params.eps_disp)?,
        interaction: interaction_features(scene, window, &params.interaction),
        categorical: CategoricalFeatures {
            agent_type: track.agent_type,
            behavior: classify_behavior(track),
            compliance: classify_compliance(track, scene.map.as_ref(), scene.signals.as_ref()),
            location_stage: classify_location(window, scene.map.as_ref()),
        },
    })
}

/// One row per window, in input order.
pub fn feature_table(
    scene: &Scene,
    windows: &[PredictionWindow],
    params: &FeatureParams,
) -> Result<Vec<FeatureVector>, FeatureError> {
    windows.iter().map(|w| window_features(scene, w, params)).collect()
}

/// Column order: `window_id`, the nine kinematic features, then
/// `NTP_x, DTP_x, DCTP_x_mean, DCTP_x_max` per radius, then the four
/// categorical labels.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureVector], radii: &[f64]) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window_id".to_string()];
    header.extend(FeatureVector::numeric_names(radii));
    header.extend(FeatureVector::CATEGORICAL_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.window_id.clone()];
        rec.extend(r.numeric_values().iter().map(|v| v.to_string()));
        rec.extend(r.categorical_labels());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
