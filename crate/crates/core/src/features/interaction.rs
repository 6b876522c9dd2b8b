use serde::{Deserialize, Serialize};

use crate::dataset::{PredictionWindow, Scene, TIME_EPS};
use crate::geometry::{add, dist, scale, sub, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractionParams {
    /// Distance decay, 1/m.
    pub lambda: f64,
    /// Coefficient `c` of the time weight `alpha(t) = 1 + c t^2`, 1/s^2.
    pub alpha_c: f64,
    /// Extrapolation horizon `T`, s.
    pub horizon_s: f64,
    /// Extrapolation step `h`, s.
    pub step_s: f64,
    pub radii_m: Vec<f64>,
}

impl Default for InteractionParams {
    fn default() -> Self {
        Self { lambda: 0.2, alpha_c: 0.25, horizon_s: 3.0, step_s: 0.5, radii_m: vec![10.0, 20.0, 30.0, 50.0] }
    }
}

impl InteractionParams {
    pub fn alpha(&self, t: f64) -> f64 {
        1.0 + self.alpha_c * t * t
    }

    /// Extrapolation instants `h, 2h, ..., T`.
    pub fn horizon_times(&self) -> Vec<f64> {
        let n = (self.horizon_s / self.step_s + 1e-9).floor() as usize;
        (1..=n).map(|k| k as f64 * self.step_s).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionAtRadius {
    pub radius_m: f64,
    pub ntp: usize,
    pub dtp: f64,
    pub dctp_mean: f64,
    pub dctp_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionFeatures {
    pub per_radius: Vec<InteractionAtRadius>,
}

/// A co-present participant's current state, used for extrapolation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ParticipantState {
    pub pos: Vec2,
    pub vel: Vec2,
}

/// Count, exponential density and extrapolated conflict of the participants
/// within each radius. DCTP `mean` aggregates the weighted distances by
/// their mean; `max` takes the closest weighted approach, i.e. the maximum
/// conflict.
pub(crate) fn interaction_from_states(
    target: ParticipantState,
    others: &[ParticipantState],
    params: &InteractionParams,
) -> InteractionFeatures {
    let times = params.horizon_times();
    let alphas: Vec<f64> = times.iter().map(|&t| params.alpha(t)).collect();
    // per-neighbour (d0, mean weighted distance, min weighted distance)
    let terms: Vec<(f64, f64, f64)> = others
        .iter()
        .map(|o| {
            let d0 = dist(target.pos, o.pos);
            let rel_p = sub(o.pos, target.pos);
            let rel_v = sub(o.vel, target.vel);
            let (mut sum, mut min) = (0.0, f64::INFINITY);
            for (&t, &a) in times.iter().zip(&alphas) {
                let wd = a * crate::geometry::norm(add(rel_p, scale(rel_v, t)));
                sum += wd;
                min = min.min(wd);
            }
            let mean = if times.is_empty() { d0 } else { sum / times.len() as f64 };
            if times.is_empty() {
                min = d0;
            }
            (d0, mean, min)
        })
        .collect();

    let per_radius = params
        .radii_m
        .iter()
        .map(|&radius| {
            let mut out = InteractionAtRadius { radius_m: radius, ntp: 0, dtp: 0.0, dctp_mean: 0.0, dctp_max: 0.0 };
            for &(d0, mean, min) in terms.iter().filter(|(d0, _, _)| *d0 <= radius) {
                out.ntp += 1;
                out.dtp += (-params.lambda * d0).exp();
                out.dctp_mean += (-params.lambda * mean).exp();
                out.dctp_max += (-params.lambda * min).exp();
            }
            out
        })
        .collect();
    InteractionFeatures { per_radius }
}

/// Interaction features of the window's target at its prediction time.
pub fn interaction_features(scene: &Scene, window: &PredictionWindow, params: &InteractionParams) -> InteractionFeatures {
    let h = &window.history;
    let dt = window.dt;
    let last = h[h.len() - 1];
    let prev = h[h.len() - 2];
    let target = ParticipantState {
        pos: last.pos(),
        vel: [(last.x - prev.x) / dt, (last.y - prev.y) / dt],
    };
    let t0 = window.t0;
    let others: Vec<ParticipantState> = scene
        .tracks
        .iter()
        .filter(|tr| tr.track_id != window.target_track_id)
        .filter(|tr| tr.start() <= t0 + TIME_EPS && tr.end() >= t0 - TIME_EPS)
        .filter_map(|tr| Some(ParticipantState { pos: tr.position_at(t0)?, vel: tr.velocity_at(t0, dt)? }))
        .collect();
    interaction_from_states(target, &others, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn still(x: f64, y: f64) -> ParticipantState {
        ParticipantState { pos: [x, y], vel: [0.0, 0.0] }
    }

    #[test]
    fn empty_neighbourhood() {
        let f = interaction_from_states(still(0.0, 0.0), &[still(80.0, 0.0)], &InteractionParams::default());
        for r in &f.per_radius {
            assert_eq!((r.ntp, r.dtp, r.dctp_mean, r.dctp_max), (0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn density_closed_form() {
        let f = interaction_from_states(
            still(0.0, 0.0),
            &[still(0.0, 0.0), still(3.0, 4.0)],
            &InteractionParams::default(),
        );
        let r10 = f.per_radius[0];
        assert_eq!(r10.ntp, 2);
        assert!((r10.dtp - (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        assert!((r10.dtp - 1.3679).abs() < 1e-4);
    }

    #[test]
    fn conflict_closed_form() {
        let p = InteractionParams::default();
        let ts = p.horizon_times();
        assert_eq!(ts, vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let mean_alpha: f64 = ts.iter().map(|&t| 1.0 + 0.25 * t * t).sum::<f64>() / 6.0;
        assert!((mean_alpha - 1.9479).abs() < 1e-4);
        let f = interaction_from_states(still(0.0, 0.0), &[still(10.0, 0.0)], &p);
        let r = f.per_radius[0];
        assert!((r.dctp_mean - (-0.2 * 10.0 * mean_alpha).exp()).abs() < 1e-12);
        assert!((r.dctp_mean - 0.020).abs() < 5e-4);
        // min weighted distance is at t = 0.5: alpha = 1.0625
        assert!((r.dctp_max - (-0.2 * 10.0 * 1.0625f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn approaching_neighbour_raises_max_conflict() {
        let p = InteractionParams::default();
        let head_on = ParticipantState { pos: [20.0, 0.0], vel: [-8.0, 0.0] };
        let f = interaction_from_states(still(0.0, 0.0), &[head_on], &p);
        let g = interaction_from_states(still(0.0, 0.0), &[still(20.0, 0.0)], &p);
        assert!(f.per_radius[1].dctp_max > g.per_radius[1].dctp_max);
    }

    fn states() -> impl Strategy<Value = Vec<ParticipantState>> {
        prop::collection::vec(
            (-60.0f64..60.0, -60.0f64..60.0, -10.0f64..10.0, -10.0f64..10.0)
                .prop_map(|(x, y, vx, vy)| ParticipantState { pos: [x, y], vel: [vx, vy] }),
            0..25,
        )
    }

    proptest! {
        #[test]
        fn bounds_and_monotonicity(others in states(), l1 in 0.01f64..1.0, dl in 0.0f64..1.0) {
            let target = ParticipantState { pos: [0.0, 0.0], vel: [3.0, -1.0] };
            let p1 = InteractionParams { lambda: l1, ..Default::default() };
            let p2 = InteractionParams { lambda: l1 + dl, ..Default::default() };
            let a = interaction_from_states(target, &others, &p1);
            let b = interaction_from_states(target, &others, &p2);
            for w in a.per_radius.windows(2) {
                prop_assert!(w[0].ntp <= w[1].ntp);
            }
            for (ra, rb) in a.per_radius.iter().zip(&b.per_radius) {
                let n = ra.ntp as f64;
                prop_assert!(ra.dtp >= 0.0 && ra.dtp <= n + 1e-12);
                prop_assert!(ra.dctp_mean >= 0.0 && ra.dctp_mean <= n + 1e-12);
                prop_assert!(ra.dctp_max >= ra.dctp_mean - 1e-12 && ra.dctp_max <= n + 1e-12);
                prop_assert!(rb.dtp <= ra.dtp + 1e-12);
                prop_assert!(rb.dctp_mean <= ra.dctp_mean + 1e-12);
                prop_assert!(rb.dctp_max <= ra.dctp_max + 1e-12);
            }
        }

        #[test]
        fn density_tends_to_count(others in states()) {
            let p = InteractionParams { lambda: 1e-9, ..Default::default() };
            let f = interaction_from_states(still(0.0, 0.0), &others, &p);
            for r in &f.per_radius {
                prop_assert!((r.dtp - r.ntp as f64).abs() < 1e-6);
            }
        }
    }
}
