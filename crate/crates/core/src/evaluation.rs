//! Displacement errors and error-retention curves.
//!
//! A retention curve at fraction `r` keeps the `r·N` windows the model is
//! most confident about, replaces the rest with ground truth (zero error) and
//! reports the mean error over all `N` windows.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dist, Vec2};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("non-finite or negative error value at {0}")]
    BadError(usize),
    #[error("retention curves use different fraction grids")]
    GridMismatch,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn check_pair(pred: &[Vec2], truth: &[Vec2]) -> Result<(), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Mean Euclidean displacement over all predicted steps.
pub fn ade(pred: &[Vec2], truth: &[Vec2]) -> Result<f64, EvalError> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| dist(*p, *t)).sum::<f64>() / pred.len() as f64)
}

/// Euclidean displacement at the last step.
pub fn fde(pred: &[Vec2], truth: &[Vec2]) -> Result<f64, EvalError> {
    check_pair(pred, truth)?;
    Ok(dist(pred[pred.len() - 1], truth[truth.len() - 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionMode {
    Uncertainty,
    Optimal,
    Random,
}

impl RetentionMode {
    pub const ALL: [RetentionMode; 3] = [Self::Uncertainty, Self::Optimal, Self::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Uncertainty => "uncertainty",
            Self::Optimal => "optimal",
            Self::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionCurve {
    pub mode: RetentionMode,
    pub fractions: Vec<f64>,
    pub values: Vec<f64>,
}

/// Indices sorted by `key` ascending, ties by index.
fn ascending_order(key: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..key.len()).collect();
    idx.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    idx
}

pub fn retention_curve(errors: &[f64], uncertainties: &[f64], mode: RetentionMode) -> Result<RetentionCurve, EvalError> {
    if errors.len() != uncertainties.len() {
        return Err(EvalError::LengthMismatch(errors.len(), uncertainties.len()));
    }
    if errors.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = errors.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(EvalError::BadError(i));
    }
    let n = errors.len();
    let fractions: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let values = match mode {
        RetentionMode::Random => {
            let mean = errors.iter().sum::<f64>() / n as f64;
            fractions.iter().map(|r| r * mean).collect()
        }
        RetentionMode::Uncertainty | RetentionMode::Optimal => {
            let key = if mode == RetentionMode::Optimal { errors } else { uncertainties };
            let mut values = Vec::with_capacity(n + 1);
            let mut sum = 0.0;
            values.push(0.0);
            for i in ascending_order(key) {
                sum += errors[i];
                values.push(sum / n as f64);
            }
            values
        }
    };
    Ok(RetentionCurve { mode, fractions, values })
}

/// Trapezoidal area under the curve.
pub fn retention_auc(curve: &RetentionCurve) -> f64 {
    curve
        .fractions
        .windows(2)
        .zip(curve.values.windows(2))
        .map(|(f, v)| (f[1] - f[0]) * (v[0] + v[1]) / 2.0)
        .sum()
}

/// `(random - uncertainty) / (random - optimal)` per fraction; 0 where the
/// denominator vanishes.
pub fn retention_scores(
    uncertainty: &RetentionCurve,
    optimal: &RetentionCurve,
    random: &RetentionCurve,
) -> Result<Vec<f64>, EvalError> {
    if uncertainty.fractions != optimal.fractions || uncertainty.fractions != random.fractions {
        return Err(EvalError::GridMismatch);
    }
    Ok((0..uncertainty.values.len())
        .map(|k| {
            let den = random.values[k] - optimal.values[k];
            if den.abs() < 1e-12 {
                0.0
            } else {
                (random.values[k] - uncertainty.values[k]) / den
            }
        })
        .collect())
}

/// All three curves for one error/uncertainty pairing.
#[derive(Clone, Debug)]
pub struct RetentionSummary {
    pub uncertainty: RetentionCurve,
    pub optimal: RetentionCurve,
    pub random: RetentionCurve,
    pub scores: Vec<f64>,
}

impl RetentionSummary {
    pub fn compute(errors: &[f64], uncertainties: &[f64]) -> Result<Self, EvalError> {
        let uncertainty = retention_curve(errors, uncertainties, RetentionMode::Uncertainty)?;
        let optimal = retention_curve(errors, uncertainties, RetentionMode::Optimal)?;
        let random = retention_curve(errors, uncertainties, RetentionMode::Random)?;
        let scores = retention_scores(&uncertainty, &optimal, &random)?;
        Ok(Self { uncertainty, optimal, random, scores })
    }

    pub fn curves(&self) -> [&RetentionCurve; 3] {
        [&self.uncertainty, &self.optimal, &self.random]
    }
}

pub fn write_curves_csv<W: Write>(w: W, curves: &[&RetentionCurve]) -> Result<(), EvalError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["mode", "fraction", "value"])?;
    for c in curves {
        for (f, v) in c.fractions.iter().zip(&c.values) {
            wr.write_record([c.mode.as_str(), &f.to_string(), &v.to_string()])?;
        }
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_scores_csv<W: Write>(w: W, fractions: &[f64], scores: &[f64]) -> Result<(), EvalError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["fraction", "score"])?;
    for (f, s) in fractions.iter().zip(scores) {
        wr.write_record([f.to_string(), s.to_string()])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_auc_csv<W: Write>(w: W, curves: &[&RetentionCurve]) -> Result<(), EvalError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["mode", "auc"])?;
    for c in curves {
        wr.write_record([c.mode.as_str(), &retention_auc(c).to_string()])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}
