use super::Prediction;
use crate::dataset::PredictionWindow;

/// Constant-velocity extrapolation of the last history step.
pub fn cv_predict(window: &PredictionWindow) -> Prediction {
    let h = &window.history;
    let last = h[h.len() - 1];
    let prev = h[h.len() - 2];
    let (dx, dy) = (last.x - prev.x, last.y - prev.y);
    let positions = (1..=window.future.len())
        .map(|i| [last.x + i as f64 * dx, last.y + i as f64 * dy])
        .collect();
    Prediction { positions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TrackPoint;
    use crate::evaluation::ade;

    fn window(history: Vec<TrackPoint>, future: Vec<TrackPoint>) -> PredictionWindow {
        PredictionWindow {
            scene_id: "cv".into(),
            target_track_id: 0,
            t0: history.last().unwrap().t,
            dt: 0.5,
            neighbor_states: vec![vec![]; history.len()],
            history,
            future,
        }
    }

    #[test]
    fn straight_line() {
        let h = (0..7).map(|i| TrackPoint::new(i as f64 * 0.5, i as f64 * 0.5, 0.0)).collect();
        let f = (7..13).map(|i| TrackPoint::new(i as f64 * 0.5, 0.0, 0.0)).collect();
        let p = cv_predict(&window(h, f));
        let xs: Vec<f64> = p.positions.iter().map(|q| q[0]).collect();
        assert_eq!(xs, vec![3.5, 4.0, 4.5, 5.0, 5.5, 6.0]);
    }

    #[test]
    fn stationary() {
        let h = (0..7).map(|i| TrackPoint::new(i as f64 * 0.5, 2.0, -1.0)).collect();
        let f = (7..13).map(|i| TrackPoint::new(i as f64 * 0.5, 0.0, 0.0)).collect();
        let p = cv_predict(&window(h, f));
        assert!(p.positions.iter().all(|q| *q == [2.0, -1.0]));
    }

    fn arc_window(rate: f64) -> PredictionWindow {
        // 5 m/s along a circle of radius 5 / rate
        let r = 5.0 / rate;
        let pt = |i: usize| {
            let a = rate * 0.5 * i as f64;
            TrackPoint::new(0.5 * i as f64, r * a.sin(), r * (1.0 - a.cos()))
        };
        window((0..7).map(pt).collect(), (7..13).map(pt).collect())
    }

    #[test]
    fn error_grows_with_turn_rate() {
        let errs: Vec<f64> = [0.05, 0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|&w| {
                let win = arc_window(w);
                ade(&cv_predict(&win).positions, &win.future_positions()).unwrap()
            })
            .collect();
        assert!(errs.windows(2).all(|e| e[1] > e[0]), "{errs:?}");
    }
}
