use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{AgentType, MapSpec, PredictionWindow, SignalPhase, SignalTimeline, Track};
use crate::geometry::{point_in_polygon, segment_crossing, wrap_angle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Straight,
    Left,
    Right,
    UTurn,
    Unknown,
}

impl Behavior {
    pub fn as_str(&self) -> &'static str {
        match self {
            Behavior::Straight => "straight",
            Behavior::Left => "left",
            Behavior::Right => "right",
            Behavior::UTurn => "u_turn",
            Behavior::Unknown => "unknown",
        }
    }

    pub fn code(&self) -> f64 {
        *self as u8 as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compliance {
    Compliant,
    YellowRunning,
    RedRunning,
    Unknown,
}

impl Compliance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Compliance::Compliant => "compliant",
            Compliance::YellowRunning => "yellow_running",
            Compliance::RedRunning => "red_running",
            Compliance::Unknown => "unknown",
        }
    }

    pub fn code(&self) -> f64 {
        *self as u8 as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocationStage {
    Stage(u8),
    Outside,
}

impl LocationStage {
    pub fn code(&self) -> f64 {
        match self {
            LocationStage::Stage(s) => *s as f64,
            LocationStage::Outside => 0.0,
        }
    }
}

impl fmt::Display for LocationStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocationStage::Stage(s) => write!(f, "{s}"),
            LocationStage::Outside => f.write_str("outside"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFeatures {
    pub agent_type: AgentType,
    pub behavior: Behavior,
    pub compliance: Compliance,
    pub location_stage: LocationStage,
}

const STRAIGHT_LIMIT: f64 = 30.0 * std::f64::consts::PI / 180.0;
const UTURN_LIMIT: f64 = 150.0 * std::f64::consts::PI / 180.0;
/// Entry/exit direction vectors shorter than this make the track ambiguous.
const MIN_DIRECTION_M: f64 = 0.5;

/// Net heading change between the entry and exit directions, each taken
/// over the first / last three steps. Positive is counter-clockwise.
pub fn net_heading_change(track: &Track) -> Option<f64> {
    let p = &track.points;
    let n = p.len();
    if n < 4 {
        return None;
    }
    let entry = (p[3].x - p[0].x, p[3].y - p[0].y);
    let exit = (p[n - 1].x - p[n - 4].x, p[n - 1].y - p[n - 4].y);
    if entry.0.hypot(entry.1) < MIN_DIRECTION_M || exit.0.hypot(exit.1) < MIN_DIRECTION_M {
        return None;
    }
    Some(wrap_angle(exit.1.atan2(exit.0) - entry.1.atan2(entry.0)))
}

pub fn classify_behavior(track: &Track) -> Behavior {
    match net_heading_change(track) {
        None => Behavior::Unknown,
        Some(d) if d.abs() <= STRAIGHT_LIMIT => Behavior::Straight,
        Some(d) if d.abs() > UTURN_LIMIT => Behavior::UTurn,
        Some(d) if d > 0.0 => Behavior::Left,
        Some(_) => Behavior::Right,
    }
}

/// Labels a track by the signal phase at the moment it first crosses a stop
/// line. No crossing means compliant.
pub fn classify_compliance(track: &Track, map: Option<&MapSpec>, signals: Option<&SignalTimeline>) -> Compliance {
    let (Some(map), Some(signals)) = (map, signals) else {
        return Compliance::Unknown;
    };
    if map.stop_lines.is_empty() {
        return Compliance::Unknown;
    }
    for w in track.points.windows(2) {
        let crossing = map
            .stop_lines
            .iter()
            .filter_map(|sl| segment_crossing(w[0].pos(), w[1].pos(), sl.a, sl.b).map(|s| (s, sl.approach_id)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((s, approach)) = crossing {
            let t = w[0].t + s * (w[1].t - w[0].t);
            return match signals.phase_at(approach, t) {
                Some(SignalPhase::Green) => Compliance::Compliant,
                Some(SignalPhase::Yellow) => Compliance::YellowRunning,
                Some(SignalPhase::Red) => Compliance::RedRunning,
                None => Compliance::Unknown,
            };
        }
    }
    Compliance::Compliant
}

/// Stage of the first region (file order) containing the target at `t0`.
pub fn classify_location(window: &PredictionWindow, map: Option<&MapSpec>) -> LocationStage {
    let Some(map) = map else {
        return LocationStage::Outside;
    };
    let p = window.last_position();
    map.regions
        .iter()
        .find(|r| point_in_polygon(p, &r.polygon))
        .map_or(LocationStage::Outside, |r| LocationStage::Stage(r.label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{MapRegion, PhaseInterval, StopLine, TrackPoint};
    use std::collections::BTreeMap;

    fn track(xy: &[(f64, f64)]) -> Track {
        Track {
            track_id: 1,
            agent_type: AgentType::SmallVehicle,
            points: xy.iter().enumerate().map(|(i, &(x, y))| TrackPoint::new(i as f64, x, y)).collect(),
        }
    }

    fn arc(sweep: f64) -> Track {
        let n = 40;
        let xy: Vec<_> = (0..n)
            .map(|i| {
                let a = -std::f64::consts::FRAC_PI_2 + sweep * i as f64 / (n - 1) as f64;
                (10.0 * a.cos(), 10.0 * a.sin())
            })
            .collect();
        track(&xy)
    }

    #[test]
    fn behaviours() {
        let straight: Vec<_> = (0..10).map(|i| (i as f64, 0.0)).collect();
        assert_eq!(classify_behavior(&track(&straight)), Behavior::Straight);
        assert_eq!(classify_behavior(&arc(std::f64::consts::FRAC_PI_2)), Behavior::Left);
        assert_eq!(classify_behavior(&arc(-std::f64::consts::FRAC_PI_2)), Behavior::Right);
        assert_eq!(classify_behavior(&arc(std::f64::consts::PI)), Behavior::UTurn);
        assert_eq!(classify_behavior(&track(&[(0.0, 0.0); 6])), Behavior::Unknown);
        assert_eq!(classify_behavior(&track(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])), Behavior::Unknown);
    }

    fn signal_setup() -> (MapSpec, SignalTimeline) {
        let map = MapSpec {
            regions: vec![],
            stop_lines: vec![StopLine { approach_id: 0, a: [5.0, -2.0], b: [5.0, 2.0] }],
        };
        let mut approaches = BTreeMap::new();
        approaches.insert(
            0,
            vec![
                PhaseInterval { phase: SignalPhase::Green, start_s: 0.0, end_s: 4.0 },
                PhaseInterval { phase: SignalPhase::Yellow, start_s: 4.0, end_s: 5.0 },
                PhaseInterval { phase: SignalPhase::Red, start_s: 5.0, end_s: 20.0 },
            ],
        );
        (map, SignalTimeline { approaches })
    }

    #[test]
    fn compliance_labels() {
        let (map, sig) = signal_setup();
        // crosses x = 5 at t = 7.5 (red)
        let red: Vec<_> = (0..12).map(|i| (i as f64 * 2.0 / 3.0, 0.0)).collect();
        assert_eq!(classify_compliance(&track(&red), Some(&map), Some(&sig)), Compliance::RedRunning);
        // crosses at t = 2.5 (green)
        let green: Vec<_> = (0..8).map(|i| (i as f64 * 2.0, 0.0)).collect();
        assert_eq!(classify_compliance(&track(&green), Some(&map), Some(&sig)), Compliance::Compliant);
        // waits before the line
        let waiting: Vec<_> = (0..15).map(|i| ((i as f64).min(4.0), 0.0)).collect();
        assert_eq!(classify_compliance(&track(&waiting), Some(&map), Some(&sig)), Compliance::Compliant);
        assert_eq!(classify_compliance(&track(&waiting), None, Some(&sig)), Compliance::Unknown);
    }

    #[test]
    fn boundary_instant_is_yellow() {
        let (map, sig) = signal_setup();
        // enumerate crossings landing exactly on the yellow->red boundary (t = 5)
        for speed in [1.0, 2.5, 5.0 / 3.0] {
            let start = 5.0 - 5.0 * speed;
            let xy: Vec<_> = (0..10).map(|i| (start + i as f64 * speed, 0.0)).collect();
            assert_eq!(
                classify_compliance(&track(&xy), Some(&map), Some(&sig)),
                Compliance::YellowRunning,
                "speed {speed}"
            );
        }
    }

    fn square(x0: f64, x1: f64, label: u8) -> MapRegion {
        MapRegion { label, approach_id: 0, polygon: vec![[x0, 0.0], [x1, 0.0], [x1, 1.0], [x0, 1.0]] }
    }

    fn window_at(x: f64, y: f64) -> PredictionWindow {
        PredictionWindow {
            scene_id: "m".into(),
            target_track_id: 1,
            t0: 0.0,
            dt: 0.5,
            history: vec![TrackPoint::new(0.0, x, y)],
            future: vec![],
            neighbor_states: vec![],
        }
    }

    #[test]
    fn location_lookup() {
        let map = MapSpec { regions: vec![square(0.0, 1.0, 3), square(1.0, 2.0, 4)], stop_lines: vec![] };
        assert_eq!(classify_location(&window_at(1.5, 0.5), Some(&map)), LocationStage::Stage(4));
        assert_eq!(classify_location(&window_at(5.0, 0.5), Some(&map)), LocationStage::Outside);
        // shared edge: first listed wins
        assert_eq!(classify_location(&window_at(1.0, 0.5), Some(&map)), LocationStage::Stage(3));
        let swapped = MapSpec { regions: vec![square(1.0, 2.0, 4), square(0.0, 1.0, 3)], stop_lines: vec![] };
        assert_eq!(classify_location(&window_at(1.0, 0.5), Some(&swapped)), LocationStage::Stage(4));
    }
}
