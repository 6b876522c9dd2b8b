use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::dataset::{PredictionWindow, TrackPoint};
use crate::geometry::wrap_angle;

/// Step displacement below which the heading is carried forward.
pub const EPS_DISP: f64 = 0.05;

/// Per-step kinematics of a uniformly sampled point sequence.
///
/// For `n` points: `speeds` and `headings` have `n - 1` entries (one per
/// step), `accelerations` and `heading_change_speeds` have `n - 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicSeries {
    pub speeds: Vec<f64>,
    pub accelerations: Vec<f64>,
    pub headings: Vec<f64>,
    pub heading_change_speeds: Vec<f64>,
}

pub fn kinematic_series(points: &[TrackPoint], eps_disp: f64) -> Result<KinematicSeries, FeatureError> {
    if points.len() < 3 {
        return Err(FeatureError::TooFewPoints(points.len()));
    }
    let dt = points[1].t - points[0].t;
    if !(dt > 0.0) {
        return Err(FeatureError::BadTimeStep(dt));
    }
    let steps: Vec<(f64, f64)> = points.windows(2).map(|w| (w[1].x - w[0].x, w[1].y - w[0].y)).collect();
    let speeds: Vec<f64> = steps.iter().map(|(dx, dy)| dx.hypot(*dy) / dt).collect();

    // Leading near-stationary steps take the first well-defined heading.
    let first_valid = steps
        .iter()
        .find(|(dx, dy)| dx.hypot(*dy) >= eps_disp)
        .map_or(0.0, |(dx, dy)| dy.atan2(*dx));
    let mut headings = Vec::with_capacity(steps.len());
    let mut current = first_valid;
    for (dx, dy) in &steps {
        if dx.hypot(*dy) >= eps_disp {
            current = dy.atan2(*dx);
        }
        headings.push(current);
    }

    let accelerations = speeds.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let heading_change_speeds =
        headings.windows(2).map(|w| wrap_angle(w[1] - w[0]).abs() / dt).collect();
    Ok(KinematicSeries { speeds, accelerations, headings, heading_change_speeds })
}

/// Velocity, acceleration and heading-change-speed summaries of a window.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KinematicFeatures {
    pub avht: f64,
    pub cv: f64,
    pub avft: f64,
    pub aaht: f64,
    pub aaft: f64,
    pub maft: f64,
    pub ahcsht: f64,
    pub ahcsft: f64,
    pub mhcsft: f64,
}

impl KinematicFeatures {
    pub const NAMES: [&'static str; 9] =
        ["AVHT", "CV", "AVFT", "AAHT", "AAFT", "MAFT", "AHCSHT", "AHCSFT", "MHCSFT"];

    pub fn values(&self) -> [f64; 9] {
        [self.avht, self.cv, self.avft, self.aaht, self.aaft, self.maft, self.ahcsht, self.ahcsft, self.mhcsft]
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn max(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

/// Acceleration features use `|a|`. The future side is differenced from the
/// last two history points onward so its first step is defined.
pub fn kinematic_features(window: &PredictionWindow, eps_disp: f64) -> Result<KinematicFeatures, FeatureError> {
    let hist = kinematic_series(&window.history, eps_disp)?;
    let h = &window.history;
    let mut seeded = Vec::with_capacity(window.future.len() + 2);
    seeded.extend_from_slice(&h[h.len() - 2..]);
    seeded.extend_from_slice(&window.future);
    let fut = kinematic_series(&seeded, eps_disp)?;

    Ok(KinematicFeatures {
        avht: mean(hist.speeds.iter().copied()),
        cv: *hist.speeds.last().unwrap(),
        avft: mean(fut.speeds[1..].iter().copied()),
        aaht: mean(hist.accelerations.iter().map(|a| a.abs())),
        aaft: mean(fut.accelerations.iter().map(|a| a.abs())),
        maft: max(fut.accelerations.iter().map(|a| a.abs())),
        ahcsht: mean(hist.heading_change_speeds.iter().copied()),
        ahcsft: mean(fut.heading_change_speeds.iter().copied()),
        mhcsft: max(fut.heading_change_speeds.iter().copied()),
    })
}
