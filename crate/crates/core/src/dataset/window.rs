use serde::{Deserialize, Serialize};

use super::{PredictionWindow, Scene, Track, TIME_EPS};
use crate::geometry::{norm, sub, Vec2};

/// A neighbour's state relative to the target at one history step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborState {
    pub track_id: u64,
    pub rel_pos: Vec2,
    pub rel_vel: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowParams {
    pub t_h_steps: usize,
    pub t_f_steps: usize,
    pub stride_steps: usize,
    pub neighbor_radius_m: f64,
    pub max_neighbors: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            t_h_steps: 6,
            t_f_steps: 6,
            stride_steps: 1,
            neighbor_radius_m: 30.0,
            max_neighbors: 8,
        }
    }
}

fn step_of(track: &Track) -> Option<f64> {
    let p = &track.points;
    (p.len() >= 2).then(|| p[1].t - p[0].t)
}

pub(crate) fn neighbors_at(
    scene: &Scene,
    target: &Track,
    t: f64,
    dt: f64,
    radius: f64,
    max_neighbors: usize,
) -> Vec<NeighborState> {
    let (Some(p_i), Some(v_i)) = (target.position_at(t), target.velocity_at(t, dt)) else {
        return Vec::new();
    };
    let mut found: Vec<(f64, NeighborState)> = scene
        .tracks
        .iter()
        .filter(|tr| tr.track_id != target.track_id)
        .filter(|tr| tr.start() <= t + TIME_EPS && tr.end() >= t - TIME_EPS)
        .filter_map(|tr| {
            let p_j = tr.position_at(t)?;
            let rel_pos = sub(p_j, p_i);
            let d = norm(rel_pos);
            if d > radius {
                return None;
            }
            let v_j = tr.velocity_at(t, dt)?;
            Some((d, NeighborState { track_id: tr.track_id, rel_pos, rel_vel: sub(v_j, v_i) }))
        })
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.track_id.cmp(&b.1.track_id)));
    found.truncate(max_neighbors);
    found.into_iter().map(|(_, n)| n).collect()
}

/// Emits every window with a full history and full future. Tracks must
/// already be on a uniform grid (see [`super::resample_scene`]).
pub fn extract_windows(scene: &Scene, params: &WindowParams) -> Vec<PredictionWindow> {
    let (th, tf) = (params.t_h_steps, params.t_f_steps);
    let stride = params.stride_steps.max(1);
    let mut out = Vec::new();
    for track in &scene.tracks {
        let n = track.points.len();
        if n < th + tf + 1 {
            continue;
        }
        let Some(dt) = step_of(track) else { continue };
        let mut i = th;
        while i + tf < n {
            let history = track.points[i - th..=i].to_vec();
            let future = track.points[i + 1..=i + tf].to_vec();
            let neighbor_states = history
                .iter()
                .map(|p| {
                    neighbors_at(scene, track, p.t, dt, params.neighbor_radius_m, params.max_neighbors)
                })
                .collect();
            out.push(PredictionWindow {
                scene_id: scene.scene_id.clone(),
                target_track_id: track.track_id,
                t0: track.points[i].t,
                dt,
                history,
                future,
                neighbor_states,
            });
            i += stride;
        }
    }
    out
}
