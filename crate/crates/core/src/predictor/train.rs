use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::network::{add_l2, window_loss_grad, DropoutMask, EncodedWindow};
use super::{init_model, mix_seed, ModelConfig, ModelError, ModelParams, TrainingConfig};
use crate::dataset::PredictionWindow;

/// Windows per gradient work unit. Chunk sums are reduced in index order,
/// so results do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

pub struct Adam {
    config: TrainingConfig,
    m: ModelParams,
    v: ModelParams,
    t: u64,
}

impl Adam {
    pub fn new(params: &ModelParams, config: &TrainingConfig) -> Self {
        Self { config: config.clone(), m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams) {
        self.t += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * gi;
                v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

fn batch_step(
    params: &ModelParams,
    data: &[EncodedWindow],
    batch: &[usize],
    mask_seeds: Option<&[u64]>,
    l2: f64,
) -> (f64, ModelParams) {
    let total_points: usize = batch.iter().map(|&i| data[i].horizon()).sum();
    let weight = 1.0 / total_points as f64;
    let positions: Vec<usize> = (0..batch.len()).collect();
    let partials: Vec<(f64, ModelParams)> = positions
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut loss = 0.0;
            for &k in chunk {
                let w = &data[batch[k]];
                let mask = mask_seeds
                    .map(|s| DropoutMask::sample(params.dropout_rate, params.hidden, w.horizon(), s[k]));
                loss += window_loss_grad(params, w, mask.as_ref(), weight, &mut g);
            }
            (loss, g)
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut loss, mut grad) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grad.add_assign(&g);
    }
    loss += add_l2(params, l2, &mut grad);
    (loss, grad)
}

/// Adam over shuffled mini-batches; shuffles and dropout masks derive from
/// `config.seed`, so identical inputs give identical parameters.
pub fn train(
    windows: &[PredictionWindow],
    model: &ModelConfig,
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainReport), ModelError> {
    if config.epochs == 0 {
        return Err(ModelError::ZeroEpochs);
    }
    if !(config.learning_rate > 0.0) || config.batch_size == 0 {
        return Err(ModelError::InvalidConfig("learning_rate > 0 and batch_size >= 1 required".into()));
    }
    if !(0.0..1.0).contains(&model.dropout_rate) {
        return Err(ModelError::InvalidConfig("dropout_rate must lie in [0, 1)".into()));
    }
    if windows.len() < config.batch_size {
        return Err(ModelError::TooFewWindows { needed: config.batch_size, got: windows.len() });
    }
    let data: Vec<EncodedWindow> = windows.iter().map(EncodedWindow::new).collect::<Result<_, _>>()?;
    let l2 = config.effective_l2(model.dropout_rate);
    let mut params = init_model(model, config.seed);
    let mut adam = Adam::new(&params, config);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        let epoch_seed = mix_seed(config.seed, epoch as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
        order.shuffle(&mut rng);
        let (mut sum, mut n) = (0.0, 0usize);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let seeds: Option<Vec<u64>> = (model.dropout_rate > 0.0).then(|| {
                let batch_seed = mix_seed(epoch_seed, b as u64);
                (0..batch.len()).map(|k| mix_seed(batch_seed, k as u64)).collect()
            });
            let (loss, grad) = batch_step(&params, &data, batch, seeds.as_deref(), l2);
            if !loss.is_finite() || !grad.is_finite() {
                return Err(ModelError::Diverged { epoch, batch: b, loss });
            }
            adam.step(&mut params, &grad);
            sum += loss * batch.len() as f64;
            n += batch.len();
        }
        report.epoch_losses.push(sum / n as f64);
    }
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TrackPoint;
    use crate::evaluation::ade;
    use crate::predictor::{cv_predict, forward};

    /// Noise-free constant-turn windows: CV is biased on every one of them.
    fn turning_windows(n: usize) -> Vec<PredictionWindow> {
        (0..n)
            .map(|i| {
                let speed = 4.0 + (i % 5) as f64;
                let omega = 0.25 * if i % 2 == 0 { 1.0 } else { -1.0 };
                let heading0 = i as f64 * 0.7;
                let mut pts = Vec::new();
                let (mut x, mut y) = (0.0, 0.0);
                for k in 0..13 {
                    pts.push(TrackPoint::new(k as f64 * 0.5, x, y));
                    let h = heading0 + omega * (k as f64 + 0.5) * 0.5;
                    x += 0.5 * speed * h.cos();
                    y += 0.5 * speed * h.sin();
                }
                PredictionWindow {
                    scene_id: "turns".into(),
                    target_track_id: i as u64,
                    t0: 3.0,
                    dt: 0.5,
                    history: pts[..7].to_vec(),
                    future: pts[7..].to_vec(),
                    neighbor_states: vec![Vec::new(); 7],
                }
            })
            .collect()
    }

    fn mean_ade(windows: &[PredictionWindow], f: impl Fn(&PredictionWindow) -> Vec<[f64; 2]>) -> f64 {
        windows.iter().map(|w| ade(&f(w), &w.future_positions()).unwrap()).sum::<f64>() / windows.len() as f64
    }

    #[test]
    fn learns_to_beat_constant_velocity_on_turns() {
        let data = turning_windows(160);
        let model = ModelConfig { hidden: 16, dropout_rate: 0.0 };
        let cfg = TrainingConfig { epochs: 60, batch_size: 16, learning_rate: 3e-3, ..Default::default() };
        let (params, report) = train(&data, &model, &cfg).unwrap();
        assert!(report.epoch_losses.last().unwrap() < &(0.5 * report.epoch_losses[0]));
        let gru = mean_ade(&data, |w| forward(&params, w, None).unwrap().positions);
        let cv = mean_ade(&data, |w| cv_predict(w).positions);
        assert!(gru < cv, "gru {gru} vs cv {cv}");
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let data = turning_windows(40);
        let model = ModelConfig { hidden: 6, dropout_rate: 0.5 };
        let cfg = TrainingConfig { epochs: 2, batch_size: 8, ..Default::default() };
        let a = train(&data, &model, &cfg).unwrap();
        let b = train(&data, &model, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = train(&data, &model, &TrainingConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let data = turning_windows(40);
        let model = ModelConfig { hidden: 6, dropout_rate: 0.0 };
        let cfg = TrainingConfig { epochs: 1, batch_size: 40, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| train(&data, &model, &cfg).unwrap());
        let b = four.install(|| train(&data, &model, &cfg).unwrap());
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let data = turning_windows(10);
        let model = ModelConfig { hidden: 4, dropout_rate: 0.0 };
        let cfg = TrainingConfig { batch_size: 4, ..Default::default() };
        assert!(matches!(train(&data, &model, &TrainingConfig { epochs: 0, ..cfg.clone() }), Err(ModelError::ZeroEpochs)));
        assert!(matches!(
            train(&data, &model, &TrainingConfig { batch_size: 64, ..cfg.clone() }),
            Err(ModelError::TooFewWindows { needed: 64, got: 10 })
        ));
        assert!(train(&data, &ModelConfig { dropout_rate: 1.0, ..model }, &cfg).is_err());
        assert!(train(&data, &model, &TrainingConfig { learning_rate: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let data = turning_windows(8);
        let model = ModelConfig { hidden: 4, dropout_rate: 0.0 };
        let cfg = TrainingConfig { batch_size: 4, epochs: 3, learning_rate: f64::MAX, ..Default::default() };
        assert!(matches!(train(&data, &model, &cfg), Err(ModelError::Diverged { .. })));
    }
}
