//! Deep ensembles and MC dropout. Both reduce to a set of member predictions
//! whose spread gives per-step epistemic variance.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::dataset::PredictionWindow;
use crate::geometry::Vec2;
use crate::predictor::{forward, mix_seed, train, ModelConfig, ModelError, ModelParams, Prediction, TrainingConfig};

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsemblePrediction {
    pub mean: Vec<Vec2>,
    pub var_x: Vec<f64>,
    pub var_y: Vec<f64>,
    pub member_predictions: Vec<Vec<Vec2>>,
}

impl EnsemblePrediction {
    /// Arithmetic member mean and sample variance (divisor K-1), floored.
    pub fn aggregate(members: Vec<Vec<Vec2>>, floor: f64) -> Result<Self, ModelError> {
        let k = members.len();
        if k < 2 {
            return Err(ModelError::InvalidConfig(format!("need >= 2 members, got {k}")));
        }
        let steps = members[0].len();
        if steps == 0 || members.iter().any(|m| m.len() != steps) {
            return Err(ModelError::InvalidConfig("members disagree on horizon".into()));
        }
        let mut mean = vec![[0.0; 2]; steps];
        for m in &members {
            for (acc, p) in mean.iter_mut().zip(m) {
                acc[0] += p[0];
                acc[1] += p[1];
            }
        }
        for p in &mut mean {
            p[0] /= k as f64;
            p[1] /= k as f64;
        }
        let mut var_x = vec![0.0; steps];
        let mut var_y = vec![0.0; steps];
        for m in &members {
            for i in 0..steps {
                var_x[i] += (m[i][0] - mean[i][0]).powi(2);
                var_y[i] += (m[i][1] - mean[i][1]).powi(2);
            }
        }
        for v in var_x.iter_mut().chain(var_y.iter_mut()) {
            *v = (*v / (k - 1) as f64).max(floor);
        }
        Ok(Self { mean, var_x, var_y, member_predictions: members })
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }
}

/// Trains `k` members; member `i` uses seed `config.seed + i`.
pub fn train_ensemble(
    windows: &[PredictionWindow],
    model: &ModelConfig,
    config: &TrainingConfig,
    k: usize,
) -> Result<Vec<ModelParams>, ModelError> {
    if k < 2 {
        return Err(ModelError::InvalidConfig(format!("ensemble needs >= 2 members, got {k}")));
    }
    (0..k)
        .into_par_iter()
        .map(|i| {
            let cfg = TrainingConfig { seed: config.seed.wrapping_add(i as u64), ..config.clone() };
            train(windows, model, &cfg).map(|(p, _)| p)
        })
        .collect()
}

pub fn ensemble_predict(members: &[ModelParams], window: &PredictionWindow, floor: f64) -> Result<EnsemblePrediction, ModelError> {
    let preds = members
        .iter()
        .map(|m| forward(m, window, None).map(|p| p.positions))
        .collect::<Result<Vec<_>, _>>()?;
    EnsemblePrediction::aggregate(preds, floor)
}

/// `k` stochastic passes with dropout masks seeded `seed + i`.
pub fn mc_dropout_predict(
    params: &ModelParams,
    window: &PredictionWindow,
    k: usize,
    seed: u64,
    floor: f64,
) -> Result<EnsemblePrediction, ModelError> {
    if params.dropout_rate <= 0.0 {
        return Err(ModelError::InvalidConfig("MC dropout needs a model trained with dropout".into()));
    }
    let preds = (0..k)
        .map(|i| forward(params, window, Some(seed.wrapping_add(i as u64))).map(|p| p.positions))
        .collect::<Result<Vec<_>, _>>()?;
    EnsemblePrediction::aggregate(preds, floor)
}

fn step_entropy(var_x: f64, var_y: f64) -> f64 {
    (2.0 * PI).ln() + 1.0 + 0.5 * (var_x * var_y).ln()
}

/// Average over steps of the differential entropy of an axis-aligned
/// bivariate Gaussian.
pub fn ape(pred: &EnsemblePrediction) -> f64 {
    let n = pred.var_x.len();
    (0..n).map(|i| step_entropy(pred.var_x[i], pred.var_y[i])).sum::<f64>() / n as f64
}

/// Entropy at the final step only.
pub fn fpe(pred: &EnsemblePrediction) -> f64 {
    let n = pred.var_x.len();
    step_entropy(pred.var_x[n - 1], pred.var_y[n - 1])
}

/// Mean prediction as a plain [`Prediction`].
pub fn mean_prediction(pred: &EnsemblePrediction) -> Prediction {
    Prediction { positions: pred.mean.clone() }
}

/// Per-step dump: window id, step, mean, variances.
pub fn write_prediction_dump<W: Write>(w: W, rows: &[(String, EnsemblePrediction)]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["window_id", "step", "mean_x", "mean_y", "var_x", "var_y"])?;
    for (id, p) in rows {
        for i in 0..p.horizon() {
            wr.write_record([
                id.clone(),
                (i + 1).to_string(),
                p.mean[i][0].to_string(),
                p.mean[i][1].to_string(),
                p.var_x[i].to_string(),
                p.var_y[i].to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Seed for the MC-dropout passes of one window, independent of window order.
pub fn window_seed(base: u64, window: &PredictionWindow) -> u64 {
    let mut h = mix_seed(base, window.target_track_id);
    h = mix_seed(h, (window.t0 * 1000.0).round() as i64 as u64);
    for b in window.scene_id.bytes() {
        h = mix_seed(h, b as u64);
    }
    h
}
