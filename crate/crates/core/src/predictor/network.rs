//! Forward pass and reverse-mode gradients of the GRU encoder-decoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Mat, ModelError, ModelParams, Prediction, CONTEXT_DIM, CONTEXT_POS_SCALE_M, CONTEXT_VEL_SCALE_MPS,
    INCREMENT_SCALE_M, INPUT_DIM, OUTPUT_DIM,
};
use crate::dataset::PredictionWindow;
use crate::geometry::Vec2;

/// A window reduced to the network's scaled, translation-free inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedWindow {
    /// Scaled history increments, one per history step after the first.
    pub increments: Vec<[f64; 2]>,
    /// Scaled mean neighbour (rel. position, rel. velocity) at the same steps.
    pub context: Vec<[f64; CONTEXT_DIM]>,
    pub last_position: Vec2,
    pub target: Vec<Vec2>,
}

impl EncodedWindow {
    pub fn new(window: &PredictionWindow) -> Result<Self, ModelError> {
        let h = &window.history;
        if h.len() < 3 || window.future.is_empty() {
            return Err(ModelError::BadWindow { history: h.len(), future: window.future.len() });
        }
        let mut increments = Vec::with_capacity(h.len() - 1);
        let mut context = Vec::with_capacity(h.len() - 1);
        for k in 1..h.len() {
            increments.push([(h[k].x - h[k - 1].x) / INCREMENT_SCALE_M, (h[k].y - h[k - 1].y) / INCREMENT_SCALE_M]);
            let mut c = [0.0; CONTEXT_DIM];
            if let Some(ns) = window.neighbor_states.get(k).filter(|n| !n.is_empty()) {
                let inv = 1.0 / ns.len() as f64;
                for n in ns {
                    c[0] += n.rel_pos[0] * inv / CONTEXT_POS_SCALE_M;
                    c[1] += n.rel_pos[1] * inv / CONTEXT_POS_SCALE_M;
                    c[2] += n.rel_vel[0] * inv / CONTEXT_VEL_SCALE_MPS;
                    c[3] += n.rel_vel[1] * inv / CONTEXT_VEL_SCALE_MPS;
                }
            }
            context.push(c);
        }
        Ok(Self { increments, context, last_position: window.last_position(), target: window.future_positions() })
    }

    pub fn horizon(&self) -> usize {
        self.target.len()
    }
}

/// Per-decoder-step dropout multipliers on the hidden state: 0 or `1/keep`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    pub steps: Vec<Vec<f64>>,
}

impl DropoutMask {
    pub fn sample(rate: f64, hidden: usize, steps: usize, seed: u64) -> Self {
        let keep = 1.0 - rate;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = (0..steps)
            .map(|_| {
                (0..hidden)
                    .map(|_| if keep > 0.0 && rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect()
            })
            .collect();
        Self { steps }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct GruRef<'a> {
    wx: &'a Mat,
    wh: &'a Mat,
    b: &'a Mat,
}

struct GruGrad<'a> {
    wx: &'a mut Mat,
    wh: &'a mut Mat,
    b: &'a mut Mat,
}

struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
    h: Vec<f64>,
}

fn gru_forward(w: &GruRef, x: &[f64], h_prev: &[f64]) -> GruCache {
    let hd = h_prev.len();
    let mut a = w.b.data.clone();
    w.wx.matvec_acc(x, &mut a);
    w.wh.matvec_rows_acc(0, 2 * hd, h_prev, &mut a[..2 * hd]);
    let z: Vec<f64> = a[..hd].iter().map(|v| sigmoid(*v)).collect();
    let r: Vec<f64> = a[hd..2 * hd].iter().map(|v| sigmoid(*v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    w.wh.matvec_rows_acc(2 * hd, 3 * hd, &rh, &mut a[2 * hd..]);
    let n: Vec<f64> = a[2 * hd..].iter().map(|v| v.tanh()).collect();
    let h = (0..hd).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * n[i]).collect();
    GruCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, n, rh, h }
}

/// Accumulates parameter gradients; returns (dL/dh_prev, dL/dx).
fn gru_backward(w: &GruRef, g: &mut GruGrad, c: &GruCache, dh: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = dh.len();
    let mut da = vec![0.0; 3 * hd];
    let mut dh_prev: Vec<f64> = (0..hd).map(|i| dh[i] * (1.0 - c.z[i])).collect();
    for i in 0..hd {
        let dz = dh[i] * (c.n[i] - c.h_prev[i]);
        let dn = dh[i] * c.z[i];
        da[i] = dz * c.z[i] * (1.0 - c.z[i]);
        da[2 * hd + i] = dn * (1.0 - c.n[i] * c.n[i]);
    }
    let mut drh = vec![0.0; hd];
    w.wh.matvec_t_rows_acc(2 * hd, 3 * hd, &da[2 * hd..], &mut drh);
    g.wh.outer_rows_acc(2 * hd, &da[2 * hd..], &c.rh);
    for i in 0..hd {
        dh_prev[i] += drh[i] * c.r[i];
        let dr = drh[i] * c.h_prev[i];
        da[hd + i] = dr * c.r[i] * (1.0 - c.r[i]);
    }
    g.wh.outer_rows_acc(0, &da[..2 * hd], &c.h_prev);
    w.wh.matvec_t_rows_acc(0, 2 * hd, &da[..2 * hd], &mut dh_prev);
    g.wx.outer_rows_acc(0, &da, &c.x);
    for (b, d) in g.b.data.iter_mut().zip(&da) {
        *b += d;
    }
    let mut dx = vec![0.0; c.x.len()];
    w.wx.matvec_t_rows_acc(0, 3 * hd, &da, &mut dx);
    (dh_prev, dx)
}

struct Trace {
    enc: Vec<GruCache>,
    dec: Vec<GruCache>,
    features: Vec<Vec<f64>>,
    positions: Vec<Vec2>,
}

fn run(params: &ModelParams, w: &EncodedWindow, mask: Option<&DropoutMask>, keep_trace: bool) -> (Vec<Vec2>, Option<Trace>) {
    let hd = params.hidden;
    let enc = GruRef { wx: &params.enc_wx, wh: &params.enc_wh, b: &params.enc_b };
    let dec = GruRef { wx: &params.dec_wx, wh: &params.dec_wh, b: &params.dec_b };
    let mut h = vec![0.0; hd];
    let mut enc_caches = Vec::new();
    let mut x = [0.0; INPUT_DIM];
    for (inc, ctx) in w.increments.iter().zip(&w.context) {
        x[0] = inc[0];
        x[1] = inc[1];
        let mut c = params.ctx_b.data.clone();
        params.ctx_w.matvec_acc(ctx, &mut c);
        x[2..].copy_from_slice(&c);
        let cache = gru_forward(&enc, &x, &h);
        h = cache.h.clone();
        if keep_trace {
            enc_caches.push(cache);
        }
    }

    let mut prev = *w.increments.last().expect("encoded windows have history");
    let mut pos = w.last_position;
    let mut positions = Vec::with_capacity(w.horizon());
    let mut dec_caches = Vec::new();
    let mut features = Vec::new();
    for step in 0..w.horizon() {
        let cache = gru_forward(&dec, &prev, &h);
        h = cache.h.clone();
        let feat: Vec<f64> = match mask {
            Some(m) => h.iter().zip(&m.steps[step]).map(|(a, b)| a * b).collect(),
            None => h.clone(),
        };
        let mut out = [params.out_b.data[0], params.out_b.data[1]];
        params.out_w.matvec_acc(&feat, &mut out);
        pos = [pos[0] + INCREMENT_SCALE_M * out[0], pos[1] + INCREMENT_SCALE_M * out[1]];
        positions.push(pos);
        prev = out;
        if keep_trace {
            dec_caches.push(cache);
            features.push(feat);
        }
    }
    let trace = keep_trace.then(|| Trace { enc: enc_caches, dec: dec_caches, features, positions: positions.clone() });
    (positions, trace)
}

/// Predicts the window's future. With `dropout_seed = Some(s)` an
/// independent Bernoulli mask (seeded by `s`) is applied to the decoder
/// hidden state before the output map at every step.
pub fn forward(params: &ModelParams, window: &PredictionWindow, dropout_seed: Option<u64>) -> Result<Prediction, ModelError> {
    let enc = EncodedWindow::new(window)?;
    forward_encoded(params, &enc, dropout_seed)
}

pub(crate) fn forward_encoded(params: &ModelParams, w: &EncodedWindow, dropout_seed: Option<u64>) -> Result<Prediction, ModelError> {
    let mask = dropout_seed.map(|s| DropoutMask::sample(params.dropout_rate, params.hidden, w.horizon(), s));
    let (positions, _) = run(params, w, mask.as_ref(), false);
    if positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("forward pass"));
    }
    Ok(Prediction { positions })
}

/// Squared-error loss contribution of one window, scaled by `weight`, with
/// its gradients accumulated into `grad`.
pub(crate) fn window_loss_grad(
    params: &ModelParams,
    w: &EncodedWindow,
    mask: Option<&DropoutMask>,
    weight: f64,
    grad: &mut ModelParams,
) -> f64 {
    let hd = params.hidden;
    let (_, trace) = run(params, w, mask, true);
    let trace = trace.unwrap();
    let tf = w.horizon();

    let mut loss = 0.0;
    let mut dpos = vec![[0.0; 2]; tf];
    for i in 0..tf {
        let e = [trace.positions[i][0] - w.target[i][0], trace.positions[i][1] - w.target[i][1]];
        loss += e[0] * e[0] + e[1] * e[1];
        dpos[i] = [2.0 * weight * e[0], 2.0 * weight * e[1]];
    }

    let dec = GruRef { wx: &params.dec_wx, wh: &params.dec_wh, b: &params.dec_b };
    let enc = GruRef { wx: &params.enc_wx, wh: &params.enc_wh, b: &params.enc_b };
    let ModelParams { ctx_w, ctx_b, enc_wx, enc_wh, enc_b, dec_wx, dec_wh, dec_b, out_w, out_b, .. } = grad;

    // position i depends on every increment j <= i
    let mut dinc = [0.0; 2];
    let mut carry = [0.0; OUTPUT_DIM];
    let mut dh = vec![0.0; hd];
    let mut dg = GruGrad { wx: dec_wx, wh: dec_wh, b: dec_b };
    for i in (0..tf).rev() {
        dinc[0] += dpos[i][0];
        dinc[1] += dpos[i][1];
        let dout = [INCREMENT_SCALE_M * dinc[0] + carry[0], INCREMENT_SCALE_M * dinc[1] + carry[1]];
        out_w.outer_rows_acc(0, &dout, &trace.features[i]);
        out_b.data[0] += dout[0];
        out_b.data[1] += dout[1];
        let mut dfeat = vec![0.0; hd];
        params.out_w.matvec_t_rows_acc(0, OUTPUT_DIM, &dout, &mut dfeat);
        match mask {
            Some(m) => {
                for k in 0..hd {
                    dh[k] += dfeat[k] * m.steps[i][k];
                }
            }
            None => {
                for k in 0..hd {
                    dh[k] += dfeat[k];
                }
            }
        }
        let (dh_prev, dx) = gru_backward(&dec, &mut dg, &trace.dec[i], &dh);
        dh = dh_prev;
        carry = [dx[0], dx[1]];
    }

    let mut eg = GruGrad { wx: enc_wx, wh: enc_wh, b: enc_b };
    for k in (0..trace.enc.len()).rev() {
        let (dh_prev, dx) = gru_backward(&enc, &mut eg, &trace.enc[k], &dh);
        dh = dh_prev;
        let dctx = &dx[2..];
        ctx_w.outer_rows_acc(0, dctx, &w.context[k]);
        for (b, d) in ctx_b.data.iter_mut().zip(dctx) {
            *b += d;
        }
    }
    weight * loss
}

/// Adds `l2 * ||weights||^2` to the loss and its gradient to `grad`.
pub(crate) fn add_l2(params: &ModelParams, l2: f64, grad: &mut ModelParams) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    for (i, (g, p)) in grad.tensors_mut().into_iter().zip(params.tensors()).enumerate() {
        if ModelParams::is_weight(i) {
            for (gv, pv) in g.data.iter_mut().zip(&p.data) {
                *gv += 2.0 * l2 * pv;
            }
        }
    }
    l2 * params.weight_sq_norm()
}

/// Mean squared position error over all predicted points of the batch plus
/// `l2 * ||weights||^2`, with gradients. `masks[i]` applies to `batch[i]`.
pub fn loss_and_gradients(
    params: &ModelParams,
    batch: &[EncodedWindow],
    masks: Option<&[DropoutMask]>,
    l2: f64,
) -> Result<(f64, ModelParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let total_points: usize = batch.iter().map(EncodedWindow::horizon).sum();
    let weight = 1.0 / total_points as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for (i, w) in batch.iter().enumerate() {
        loss += window_loss_grad(params, w, masks.map(|m| &m[i]), weight, &mut grad);
    }
    loss += add_l2(params, l2, &mut grad);
    if !loss.is_finite() {
        return Err(ModelError::NonFinite("loss"));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{init_model, ModelConfig};
    use crate::testutil::window;

    #[test]
    fn zero_network_is_stationary() {
        let p = ModelParams::zeros(8, 0.0);
        let w = window(1);
        let pred = forward(&p, &w, None).unwrap();
        assert_eq!(pred.positions, vec![w.last_position(); 6]);
    }

    #[test]
    fn deterministic_without_dropout() {
        let p = init_model(&ModelConfig { hidden: 16, dropout_rate: 0.5 }, 2);
        let w = window(2);
        assert_eq!(forward(&p, &w, None).unwrap(), forward(&p, &w, None).unwrap());
        assert_eq!(forward(&p, &w, Some(7)).unwrap(), forward(&p, &w, Some(7)).unwrap());
        assert_ne!(forward(&p, &w, Some(7)).unwrap(), forward(&p, &w, Some(8)).unwrap());
    }

    #[test]
    fn translation_equivariance() {
        let p = init_model(&ModelConfig { hidden: 16, dropout_rate: 0.0 }, 5);
        let w = window(3);
        let off = [123.25, -40.5];
        let a = forward(&p, &w, None).unwrap();
        let b = forward(&p, &w.translated(off), None).unwrap();
        for (pa, pb) in a.positions.iter().zip(&b.positions) {
            assert!((pb[0] - pa[0] - off[0]).abs() < 1e-9);
            assert!((pb[1] - pa[1] - off[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_gradient() {
        let p = init_model(&ModelConfig { hidden: 8, dropout_rate: 0.0 }, 9);
        let w = window(4);
        let pred = forward(&p, &w, None).unwrap();
        let mut enc = EncodedWindow::new(&w).unwrap();
        enc.target = pred.positions;
        let (loss, grad) = loss_and_gradients(&p, &[enc], None, 0.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.tensors().iter().all(|t| t.data.iter().all(|g| *g == 0.0)));
    }

    #[test]
    fn l2_term_is_linear() {
        let p = init_model(&ModelConfig { hidden: 8, dropout_rate: 0.0 }, 9);
        let enc = EncodedWindow::new(&window(5)).unwrap();
        let (l0, _) = loss_and_gradients(&p, std::slice::from_ref(&enc), None, 0.0).unwrap();
        let (l1, _) = loss_and_gradients(&p, std::slice::from_ref(&enc), None, 1e-3).unwrap();
        let (l2, _) = loss_and_gradients(&p, std::slice::from_ref(&enc), None, 2e-3).unwrap();
        assert!(((l2 - l0) - 2.0 * (l1 - l0)).abs() < 1e-12 * l0.max(1.0));
        assert!((l1 - l0 - 1e-3 * p.weight_sq_norm()).abs() < 1e-12);
    }

    #[test]
    fn mask_keep_rate() {
        let m = DropoutMask::sample(0.5, 1000, 4, 1);
        let kept: usize = m.steps.iter().flatten().filter(|v| **v > 0.0).count();
        assert!((kept as f64 / 4000.0 - 0.5).abs() < 0.05);
        assert!(m.steps.iter().flatten().all(|v| *v == 0.0 || *v == 2.0));
    }
}
