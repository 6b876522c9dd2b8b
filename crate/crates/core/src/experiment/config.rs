use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::analysis::ForestConfig;
use crate::dataset::WindowParams;
use crate::features::FeatureParams;
use crate::predictor::{ModelConfig, TrainingConfig};
use crate::synthgen::{ConfigOverride, GeneratorConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMeasure {
    #[default]
    Ape,
    Fpe,
}

/// A recorded scene directory (`tracks.csv`, optional `map.json` and
/// `signals.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub name: String,
    pub path: PathBuf,
}

/// Every hyperparameter of a run. The top-level `seed` drives splits,
/// member training, MC passes and forests; the `seed` fields inside
/// `training` and `forest` are overwritten by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub test_ratio: f64,
    pub resample_hz: f64,
    pub ensemble_k: usize,
    pub variance_floor: f64,
    pub uncertainty: UncertaintyMeasure,
    /// Recorded datasets; when empty the synthetic family is used.
    pub datasets: Vec<DatasetSource>,
    pub synth: GeneratorConfig,
    pub family: Vec<ConfigOverride>,
    pub windows: WindowParams,
    pub features: FeatureParams,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub forest: ForestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            test_ratio: 0.2,
            resample_hz: 2.0,
            ensemble_k: 5,
            variance_floor: crate::ensemble::DEFAULT_VARIANCE_FLOOR,
            uncertainty: UncertaintyMeasure::Ape,
            datasets: Vec::new(),
            synth: GeneratorConfig::default(),
            family: vec![
                ConfigOverride { name: Some("base".into()), ..Default::default() },
                ConfigOverride { name: Some("fast".into()), speed_scale: Some(2.0), ..Default::default() },
            ],
            windows: WindowParams::default(),
            features: FeatureParams::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file; relative dataset paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return bad(format!("test_ratio {} outside (0, 1)", self.test_ratio));
        }
        if !(self.resample_hz > 0.0) {
            return bad("resample_hz must be positive".into());
        }
        if self.ensemble_k < 2 {
            return bad(format!("ensemble_k must be >= 2, got {}", self.ensemble_k));
        }
        if !(self.variance_floor > 0.0) {
            return bad("variance_floor must be positive".into());
        }
        if self.model.hidden == 0 {
            return bad("model.hidden must be >= 1".into());
        }
        if self.datasets.is_empty() {
            self.synth.validate()?;
        }
        Ok(())
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig { seed: self.seed, ..self.training.clone() }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig { seed: self.seed, ..self.forest.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let other = ExperimentConfig { seed: 1, ..cfg.clone() };
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("seed = 4\n[model]\nhidden = 16\n[features]\nlambda = 0.5\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.model.hidden, 16);
        assert_eq!(cfg.features.interaction.lambda, 0.5);
        assert_eq!(cfg.ensemble_k, 5);
        assert_eq!(cfg.training_config().seed, 4);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("ensemble_k = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("test_ratio = 1.5").is_err());
        assert!(ExperimentConfig::from_toml_str("no_such_key = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("uncertainty = \"entropy\"").is_err());
    }
}
