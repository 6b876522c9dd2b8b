use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{loss_and_gradients, DropoutMask, EncodedWindow};
use super::{init_model, mix_seed, ModelConfig};
use crate::dataset::{NeighborState, PredictionWindow, TrackPoint};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub hidden: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub n_params: usize,
    pub batch: usize,
    pub step: f64,
    /// Test hook: perturbs the analytic gradient before comparing.
    pub corrupt_analytic: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { hidden: 8, seed: 0, tolerance: 1e-4, n_params: 120, batch: 3, step: 1e-5, corrupt_analytic: false }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients from
/// amplifying rounding noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn random_window(rng: &mut ChaCha8Rng, id: u64) -> PredictionWindow {
    let (mut x, mut y) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
    let (mut vx, mut vy) = (rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
    let mut pts = Vec::new();
    for i in 0..13 {
        pts.push(TrackPoint::new(i as f64 * 0.5, x, y));
        vx += rng.gen_range(-1.0..1.0);
        vy += rng.gen_range(-1.0..1.0);
        x += 0.5 * vx;
        y += 0.5 * vy;
    }
    let neighbor_states = (0..7)
        .map(|_| {
            let n = rng.gen_range(0..4);
            (0..n)
                .map(|j| NeighborState {
                    track_id: j,
                    rel_pos: [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)],
                    rel_vel: [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)],
                })
                .collect()
        })
        .collect();
    PredictionWindow {
        scene_id: "gradcheck".into(),
        target_track_id: id,
        t0: 3.0,
        dt: 0.5,
        history: pts[..7].to_vec(),
        future: pts[7..].to_vec(),
        neighbor_states,
    }
}

/// Compares analytic gradients of a small random model (dropout and L2
/// active) against central differences on randomly sampled parameters.
pub fn grad_check(opts: &GradCheckOptions) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params = init_model(&ModelConfig { hidden: opts.hidden, dropout_rate: 0.5 }, mix_seed(opts.seed, 1));
    // non-zero biases so every path is exercised
    for (i, t) in params.tensors_mut().into_iter().enumerate() {
        if !super::ModelParams::is_weight(i) {
            for b in &mut t.data {
                *b = rng.gen_range(-0.3..0.3);
            }
        }
    }
    let batch: Vec<EncodedWindow> = (0..opts.batch)
        .map(|i| EncodedWindow::new(&random_window(&mut rng, i as u64)).unwrap())
        .collect();
    let masks: Vec<DropoutMask> = (0..opts.batch)
        .map(|i| DropoutMask::sample(0.5, opts.hidden, batch[i].horizon(), mix_seed(opts.seed, 100 + i as u64)))
        .collect();
    let l2 = 1e-3;
    let (_, mut grad) = loss_and_gradients(&params, &batch, Some(&masks), l2).expect("finite loss");
    if opts.corrupt_analytic {
        for t in grad.tensors_mut() {
            for g in &mut t.data {
                *g = *g * 1.01 + 1e-3;
            }
        }
    }

    let n = params.n_params();
    let mut worst = (0.0f64, 0usize);
    for _ in 0..opts.n_params {
        let idx = rng.gen_range(0..n);
        let orig = params.get_flat(idx);
        params.set_flat(idx, orig + opts.step);
        let (lp, _) = loss_and_gradients(&params, &batch, Some(&masks), l2).expect("finite loss");
        params.set_flat(idx, orig - opts.step);
        let (lm, _) = loss_and_gradients(&params, &batch, Some(&masks), l2).expect("finite loss");
        params.set_flat(idx, orig);
        let numeric = (lp - lm) / (2.0 * opts.step);
        let err = relative_error(grad.get_flat(idx), numeric);
        if err > worst.0 {
            worst = (err, idx);
        }
    }
    GradCheckReport {
        checked: opts.n_params,
        max_relative_error: worst.0,
        worst_index: worst.1,
        passed: worst.0 < opts.tolerance,
    }
}
