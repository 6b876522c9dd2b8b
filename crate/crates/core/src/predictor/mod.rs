//! Trajectory predictors: a constant-velocity baseline and an
//! interaction-aware GRU encoder-decoder trained with Adam.
//!
//! The network consumes per-step position increments and neighbour context
//! relative to the target, so it is translation equivariant. Gradients are
//! computed by hand-written backpropagation through time; [`grad_check`]
//! compares them to central differences.

mod baseline;
mod checkpoint;
mod gradcheck;
mod network;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

pub use baseline::cv_predict;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use network::{forward, loss_and_gradients, DropoutMask, EncodedWindow};
pub use train::{train, Adam, TrainReport};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("epochs must be >= 1")]
    ZeroEpochs,
    #[error("need at least {needed} windows for one batch, got {got}")]
    TooFewWindows { needed: usize, got: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("window has {history} history / {future} future points; need >= 3 / >= 1")]
    BadWindow { history: usize, future: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-step target input: increment (2) + mean neighbour rel. position (2) +
/// mean neighbour rel. velocity (2).
pub const INPUT_DIM: usize = 6;
pub const CONTEXT_DIM: usize = 4;
pub const OUTPUT_DIM: usize = 2;

/// Fixed input/output scaling; keeps pre-activations O(1) at urban speeds.
pub const INCREMENT_SCALE_M: f64 = 4.0;
pub const CONTEXT_POS_SCALE_M: f64 = 10.0;
pub const CONTEXT_VEL_SCALE_MPS: f64 = 5.0;

/// Dense row-major matrix; biases are stored as `n x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self[rows] * x` for rows `r0..r1`.
    #[inline]
    pub fn matvec_rows_acc(&self, r0: usize, r1: usize, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, r) in out.iter_mut().zip(r0..r1) {
            *o += self.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    #[inline]
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_rows_acc(0, self.rows, x, out);
    }

    /// `out += self[rows]^T * g` for rows `r0..r1`.
    #[inline]
    pub fn matvec_t_rows_acc(&self, r0: usize, r1: usize, g: &[f64], out: &mut [f64]) {
        for (gi, r) in g.iter().zip(r0..r1) {
            if *gi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += gi * a;
            }
        }
    }

    /// `self[rows] += g x^T` for rows `r0..r1`.
    #[inline]
    pub fn outer_rows_acc(&mut self, r0: usize, g: &[f64], x: &[f64]) {
        let cols = self.cols;
        for (k, gi) in g.iter().enumerate() {
            if *gi == 0.0 {
                continue;
            }
            let row = &mut self.data[(r0 + k) * cols..(r0 + k + 1) * cols];
            for (o, xv) in row.iter_mut().zip(x) {
                *o += gi * xv;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: 64, dropout_rate: 0.0 }
    }
}

/// All trainable tensors of the encoder-decoder. Gate blocks are stacked
/// `[update; reset; candidate]` along the rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub hidden: usize,
    pub dropout_rate: f64,
    pub ctx_w: Mat,
    pub ctx_b: Mat,
    pub enc_wx: Mat,
    pub enc_wh: Mat,
    pub enc_b: Mat,
    pub dec_wx: Mat,
    pub dec_wh: Mat,
    pub dec_b: Mat,
    pub out_w: Mat,
    pub out_b: Mat,
}

pub const TENSOR_NAMES: [&str; 10] =
    ["ctx_w", "ctx_b", "enc_wx", "enc_wh", "enc_b", "dec_wx", "dec_wh", "dec_b", "out_w", "out_b"];

impl ModelParams {
    pub fn zeros(hidden: usize, dropout_rate: f64) -> Self {
        let g = 3 * hidden;
        Self {
            hidden,
            dropout_rate,
            ctx_w: Mat::zeros(CONTEXT_DIM, CONTEXT_DIM),
            ctx_b: Mat::zeros(CONTEXT_DIM, 1),
            enc_wx: Mat::zeros(g, INPUT_DIM),
            enc_wh: Mat::zeros(g, hidden),
            enc_b: Mat::zeros(g, 1),
            dec_wx: Mat::zeros(g, OUTPUT_DIM),
            dec_wh: Mat::zeros(g, hidden),
            dec_b: Mat::zeros(g, 1),
            out_w: Mat::zeros(OUTPUT_DIM, hidden),
            out_b: Mat::zeros(OUTPUT_DIM, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden, self.dropout_rate)
    }

    pub fn tensors(&self) -> [&Mat; 10] {
        [
            &self.ctx_w, &self.ctx_b, &self.enc_wx, &self.enc_wh, &self.enc_b, &self.dec_wx,
            &self.dec_wh, &self.dec_b, &self.out_w, &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Mat; 10] {
        [
            &mut self.ctx_w, &mut self.ctx_b, &mut self.enc_wx, &mut self.enc_wh, &mut self.enc_b,
            &mut self.dec_wx, &mut self.dec_wh, &mut self.dec_b, &mut self.out_w, &mut self.out_b,
        ]
    }

    /// Whether tensor `i` of [`Self::tensors`] is a weight (regularised) or a bias.
    pub fn is_weight(i: usize) -> bool {
        !TENSOR_NAMES[i].ends_with("_b")
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn weight_sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .enumerate()
            .filter(|(i, _)| Self::is_weight(*i))
            .map(|(_, t)| t.data.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn get_flat(&self, mut idx: usize) -> f64 {
        for t in self.tensors() {
            if idx < t.data.len() {
                return t.data[idx];
            }
            idx -= t.data.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut idx: usize, v: f64) {
        for t in self.tensors_mut() {
            if idx < t.data.len() {
                t.data[idx] = v;
                return;
            }
            idx -= t.data.len();
        }
        panic!("flat index out of range")
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }
}

/// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
pub fn init_model(config: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::zeros(config.hidden, config.dropout_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, t) in p.tensors_mut().into_iter().enumerate() {
        if !ModelParams::is_weight(i) {
            continue;
        }
        let bound = 1.0 / (t.cols as f64).sqrt();
        for w in &mut t.data {
            *w = rng.gen_range(-bound..=bound);
        }
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// `None` selects 1e-4 for dropout models and 0 otherwise.
    pub l2_coefficient: Option<f64>,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 30,
            l2_coefficient: None,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn effective_l2(&self, dropout_rate: f64) -> f64 {
        self.l2_coefficient.unwrap_or(if dropout_rate > 0.0 { 1e-4 } else { 0.0 })
    }
}

/// Predicted future positions, one per step.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub positions: Vec<Vec2>,
}

/// SplitMix64 finaliser; derives independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = ModelConfig { hidden: 16, dropout_rate: 0.0 };
        let a = init_model(&cfg, 3);
        assert_eq!(a, init_model(&cfg, 3));
        assert_ne!(a, init_model(&cfg, 4));
        for (i, t) in a.tensors().iter().enumerate() {
            if ModelParams::is_weight(i) {
                let b = 1.0 / (t.cols as f64).sqrt();
                assert!(t.data.iter().all(|w| w.abs() <= b));
                assert!(t.data.iter().any(|w| *w != 0.0));
            } else {
                assert!(t.data.iter().all(|w| *w == 0.0));
            }
        }
    }

    #[test]
    fn shapes() {
        let p = ModelParams::zeros(8, 0.0);
        let h = 8;
        let expected = 16 + 4 + 3 * h * 6 + 3 * h * h + 3 * h + 3 * h * 2 + 3 * h * h + 3 * h + 2 * h + 2;
        assert_eq!(p.n_params(), expected);
    }

    #[test]
    fn flat_indexing_roundtrip() {
        let mut p = ModelParams::zeros(4, 0.0);
        let n = p.n_params();
        for i in (0..n).step_by(7) {
            p.set_flat(i, i as f64);
            assert_eq!(p.get_flat(i), i as f64);
        }
    }

    #[test]
    fn default_l2_follows_dropout() {
        let c = TrainingConfig::default();
        assert_eq!(c.effective_l2(0.5), 1e-4);
        assert_eq!(c.effective_l2(0.0), 0.0);
        let c = TrainingConfig { l2_coefficient: Some(3e-3), ..c };
        assert_eq!(c.effective_l2(0.0), 3e-3);
    }
}
