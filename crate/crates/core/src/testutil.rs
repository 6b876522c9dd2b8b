use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{NeighborState, PredictionWindow, TrackPoint};

/// Random 7+6 point window with a few neighbours on most steps.
pub(crate) fn window(seed: u64) -> PredictionWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut y) = (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
    let mut pts = Vec::new();
    for i in 0..13 {
        pts.push(TrackPoint::new(i as f64 * 0.5, x, y));
        x += rng.gen_range(1.0..4.0);
        y += rng.gen_range(-1.0..1.0);
    }
    let neighbor_states = (0..7)
        .map(|k| {
            (0..(k % 3))
                .map(|j| NeighborState {
                    track_id: j as u64 + 10,
                    rel_pos: [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)],
                    rel_vel: [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                })
                .collect()
        })
        .collect();
    PredictionWindow {
        scene_id: "t".into(),
        target_track_id: seed,
        t0: 3.0,
        dt: 0.5,
        history: pts[..7].to_vec(),
        future: pts[7..].to_vec(),
        neighbor_states,
    }
}
