//! Canonical trajectory data model and everything needed to turn raw track
//! files into prediction windows.

mod io;
mod resample;
mod split;
mod window;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_simple_polygon, Vec2};

pub use io::{load_scene_dir, load_tracks, write_scene_dir, write_tracks, ColumnSchema};
pub use resample::{resample_scene, resample_track};
pub use split::split_dataset;
pub use window::{extract_windows, NeighborState, WindowParams};

pub type TrackId = u64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{field}` value `{value}`")]
    BadValue { row: usize, field: String, value: String },
    #[error("unknown agent_type tag `{0}`")]
    UnknownAgentType(String),
    #[error("track {0}: non-monotone timestamps")]
    NonMonotone(TrackId),
    #[error("track {0}: agent_type changes within the track")]
    InconsistentAgentType(TrackId),
    #[error("track {track}: non-finite coordinate")]
    NonFinite { track: TrackId },
    #[error("track {track}: duration {duration}s is shorter than one output step of {step}s")]
    TooShort { track: TrackId, duration: f64, step: f64 },
    #[error("resampling rate must be positive, got {0}")]
    BadRate(f64),
    #[error("test_ratio must lie in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("need at least 2 distinct tracks to split, got {0}")]
    TooFewTracks(usize),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid signal timeline: {0}")]
    InvalidSignals(String),
    #[error("duplicate track id {0} in scene")]
    DuplicateTrack(TrackId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    SmallVehicle,
    LargeVehicle,
    TwoWheeler,
    Pedestrian,
}

impl AgentType {
    pub const ALL: [AgentType; 4] = [
        AgentType::SmallVehicle,
        AgentType::LargeVehicle,
        AgentType::TwoWheeler,
        AgentType::Pedestrian,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AgentType::SmallVehicle => "small_vehicle",
            AgentType::LargeVehicle => "large_vehicle",
            AgentType::TwoWheeler => "two_wheeler",
            AgentType::Pedestrian => "pedestrian",
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentType {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentType::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| DatasetError::UnknownAgentType(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TrackPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    #[inline]
    pub fn pos(&self) -> Vec2 {
        [self.x, self.y]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: TrackId,
    pub agent_type: AgentType,
    pub points: Vec<TrackPoint>,
}

/// Time tolerance when matching timestamps across tracks.
pub(crate) const TIME_EPS: f64 = 1e-6;

impl Track {
    pub fn start(&self) -> f64 {
        self.points.first().map_or(f64::NAN, |p| p.t)
    }

    pub fn end(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.t)
    }

    /// Linearly interpolated position at `t`, or `None` outside the track span.
    pub fn position_at(&self, t: f64) -> Option<Vec2> {
        let pts = &self.points;
        if pts.is_empty() || t < self.start() - TIME_EPS || t > self.end() + TIME_EPS {
            return None;
        }
        let idx = pts.partition_point(|p| p.t < t - TIME_EPS);
        if idx < pts.len() && (pts[idx].t - t).abs() <= TIME_EPS {
            return Some(pts[idx].pos());
        }
        if idx == 0 {
            return Some(pts[0].pos());
        }
        if idx >= pts.len() {
            return Some(pts[pts.len() - 1].pos());
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        let w = (t - a.t) / (b.t - a.t);
        Some([a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)])
    }

    /// Finite-difference velocity at `t` over step `dt`: backward when the
    /// track covers `t - dt`, forward otherwise, zero for a single point.
    pub fn velocity_at(&self, t: f64, dt: f64) -> Option<Vec2> {
        let p = self.position_at(t)?;
        if let Some(prev) = self.position_at(t - dt) {
            if t - dt >= self.start() - TIME_EPS {
                return Some([(p[0] - prev[0]) / dt, (p[1] - prev[1]) / dt]);
            }
        }
        if let Some(next) = self.position_at(t + dt) {
            if t + dt <= self.end() + TIME_EPS {
                return Some([(next[0] - p[0]) / dt, (next[1] - p[1]) / dt]);
            }
        }
        Some([0.0, 0.0])
    }
}

/// One map polygon tagged with its passage stage (1..=6) and approach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRegion {
    pub label: u8,
    pub approach_id: u32,
    pub polygon: Vec<Vec2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopLine {
    pub approach_id: u32,
    pub a: Vec2,
    pub b: Vec2,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub regions: Vec<MapRegion>,
    pub stop_lines: Vec<StopLine>,
}

impl MapSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        for (i, r) in self.regions.iter().enumerate() {
            if !(1..=6).contains(&r.label) {
                return Err(DatasetError::InvalidMap(format!(
                    "region {i}: label {} outside 1..6",
                    r.label
                )));
            }
            if r.polygon.iter().flatten().any(|c| !c.is_finite()) {
                return Err(DatasetError::InvalidMap(format!("region {i}: non-finite vertex")));
            }
            if !is_simple_polygon(&r.polygon) {
                return Err(DatasetError::InvalidMap(format!("region {i}: polygon is not simple")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPhase {
    Green,
    Yellow,
    Red,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub phase: SignalPhase,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalTimeline {
    pub approaches: BTreeMap<u32, Vec<PhaseInterval>>,
}

impl SignalTimeline {
    pub fn validate(&self) -> Result<(), DatasetError> {
        for (id, phases) in &self.approaches {
            for (k, p) in phases.iter().enumerate() {
                if !(p.end_s > p.start_s) {
                    return Err(DatasetError::InvalidSignals(format!(
                        "approach {id}: interval {k} is empty"
                    )));
                }
                if k > 0 && (phases[k - 1].end_s - p.start_s).abs() > TIME_EPS {
                    return Err(DatasetError::InvalidSignals(format!(
                        "approach {id}: interval {k} is not contiguous with its predecessor"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Phase in force at `t`. Intervals are treated as `(start, end]`, so a
    /// boundary instant belongs to the phase that is ending; the very first
    /// interval also owns its start instant.
    pub fn phase_at(&self, approach_id: u32, t: f64) -> Option<SignalPhase> {
        let phases = self.approaches.get(&approach_id)?;
        let first = phases.first()?;
        if (t - first.start_s).abs() <= TIME_EPS {
            return Some(first.phase);
        }
        phases
            .iter()
            .find(|p| t > p.start_s + TIME_EPS && t <= p.end_s + TIME_EPS)
            .map(|p| p.phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub tracks: Vec<Track>,
    pub map: Option<MapSpec>,
    pub signals: Option<SignalTimeline>,
}

impl Scene {
    pub fn track(&self, id: TrackId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.track_id == id)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tracks {
            if !seen.insert(t.track_id) {
                return Err(DatasetError::DuplicateTrack(t.track_id));
            }
        }
        if let Some(m) = &self.map {
            m.validate()?;
        }
        if let Some(s) = &self.signals {
            s.validate()?;
        }
        Ok(())
    }
}

/// One prediction task: target history, ground-truth future and the
/// per-history-step neighbour context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionWindow {
    pub scene_id: String,
    pub target_track_id: TrackId,
    pub t0: f64,
    pub dt: f64,
    pub history: Vec<TrackPoint>,
    pub future: Vec<TrackPoint>,
    pub neighbor_states: Vec<Vec<NeighborState>>,
}

impl PredictionWindow {
    /// Stable identifier `scene:track:t0_millis`.
    pub fn id(&self) -> String {
        format!(
            "{}:{}:{}",
            self.scene_id,
            self.target_track_id,
            (self.t0 * 1000.0).round() as i64
        )
    }

    pub fn last_position(&self) -> Vec2 {
        self.history[self.history.len() - 1].pos()
    }

    pub fn future_positions(&self) -> Vec<Vec2> {
        self.future.iter().map(TrackPoint::pos).collect()
    }

    /// Copy of the window with every position shifted by `offset`.
    pub fn translated(&self, offset: Vec2) -> Self {
        let shift = |p: &TrackPoint| TrackPoint::new(p.t, p.x + offset[0], p.y + offset[1]);
        Self {
            history: self.history.iter().map(shift).collect(),
            future: self.future.iter().map(shift).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<PredictionWindow>,
    pub test: Vec<PredictionWindow>,
    pub seed: u64,
}
