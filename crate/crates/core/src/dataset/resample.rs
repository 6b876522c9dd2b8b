use super::{DatasetError, Scene, Track, TrackPoint, TIME_EPS};

/// Resamples a track to a uniform `1 / rate_hz` grid anchored at its first
/// timestamp, interpolating linearly. Never extrapolates past the last point.
pub fn resample_track(track: &Track, rate_hz: f64) -> Result<Track, DatasetError> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(DatasetError::BadRate(rate_hz));
    }
    let step = 1.0 / rate_hz;
    let pts = &track.points;
    let duration = if pts.is_empty() { 0.0 } else { track.end() - track.start() };
    if pts.len() < 2 || duration + TIME_EPS < step {
        return Err(DatasetError::TooShort { track: track.track_id, duration, step });
    }
    let t0 = track.start();
    let n_out = ((duration + TIME_EPS) / step).floor() as usize + 1;

    let mut out = Vec::with_capacity(n_out);
    let mut seg = 0usize;
    for k in 0..n_out {
        let t = t0 + k as f64 * step;
        while seg + 1 < pts.len() - 1 && pts[seg + 1].t < t - TIME_EPS {
            seg += 1;
        }
        let (a, b) = (pts[seg], pts[seg + 1]);
        let p = if (a.t - t).abs() <= TIME_EPS {
            TrackPoint::new(t, a.x, a.y)
        } else if (b.t - t).abs() <= TIME_EPS {
            TrackPoint::new(t, b.x, b.y)
        } else {
            let w = (t - a.t) / (b.t - a.t);
            TrackPoint::new(t, a.x + w * (b.x - a.x), a.y + w * (b.y - a.y))
        };
        out.push(p);
    }
    Ok(Track { track_id: track.track_id, agent_type: track.agent_type, points: out })
}

/// Resamples every track of the scene; tracks shorter than one output step
/// are dropped.
pub fn resample_scene(scene: &Scene, rate_hz: f64) -> Result<Scene, DatasetError> {
    let mut tracks = Vec::with_capacity(scene.tracks.len());
    for tr in &scene.tracks {
        match resample_track(tr, rate_hz) {
            Ok(t) => tracks.push(t),
            Err(DatasetError::TooShort { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Scene { tracks, ..scene.clone() })
}
