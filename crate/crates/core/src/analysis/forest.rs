use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::predictor::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node; `None` means `ceil(J / 3)`.
    pub m_try: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 12, min_leaf: 5, m_try: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    /// `(feature, threshold, left, right)`; rows with `x[feature] <= threshold` go left.
    pub split: Option<(usize, f64, usize, usize)>,
    pub value: f64,
    pub n_samples: usize,
    /// Variance of the targets reaching the node.
    pub impurity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Times each training row was drawn into this tree's bootstrap.
    pub in_bag: Vec<u32>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.split {
                Some((f, t, l, r)) => i = if row[f] <= t { l } else { r },
                None => return node.value,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub seed: u64,
}

fn mean_var(targets: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| targets[i]).sum::<f64>() / n;
    let var = idx.iter().map(|&i| (targets[i] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    m_try: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Best `(feature, threshold, weighted child SSE)`; only strict
    /// improvements replace the incumbent, so ties keep the lowest feature
    /// and then the lowest threshold.
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n = idx.len();
        let j = self.x[0].len();
        let mut feats = sample(rng, j, self.m_try).into_vec();
        feats.sort_unstable();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 0.0;
        let mut order = idx.to_vec();
        for f in feats {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut sl, mut sql) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = self.y[order[k]];
                sl += yi;
                sql += yi * yi;
                let nl = k + 1;
                let (xa, xb) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if nl < self.cfg.min_leaf || n - nl < self.cfg.min_leaf || xa == xb {
                    continue;
                }
                let (sr, sqr) = (total - sl, total_sq - sql);
                let sse = (sql - sl * sl / nl as f64) + (sqr - sr * sr / (n - nl) as f64);
                let gain = parent_sse - sse;
                if gain > best_gain * (1.0 + 1e-12) + 1e-12 * parent_sse.abs() {
                    best_gain = gain;
                    best = Some((f, 0.5 * (xa + xb)));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let (value, impurity) = mean_var(self.y, &idx);
        let id = self.nodes.len();
        self.nodes.push(Node { split: None, value, n_samples: idx.len(), impurity });
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf || impurity <= 0.0 {
            return id;
        }
        if let Some((f, t)) = self.best_split(&idx, rng) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][f] <= t);
            let li = self.grow(l, depth + 1, rng);
            let ri = self.grow(r, depth + 1, rng);
            self.nodes[id].split = Some((f, t, li, ri));
        }
        id
    }
}

fn validate(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Result<usize, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(AnalysisError::TooFewSamples { needed: 1, got: 0 });
    }
    let j = x[0].len();
    if j == 0 || x.iter().any(|r| r.len() != j) {
        return Err(AnalysisError::DimensionMismatch { expected: j, got: 0 });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    if cfg.n_trees == 0 || cfg.min_leaf == 0 {
        return Err(AnalysisError::InvalidConfig("n_trees and min_leaf must be >= 1".into()));
    }
    let m = cfg.m_try.unwrap_or(j.div_ceil(3));
    if m == 0 || m > j {
        return Err(AnalysisError::InvalidConfig(format!("m_try {m} outside 1..={j}")));
    }
    Ok(m)
}

/// Bagged CART regression trees with variance impurity. Tree `i` draws its
/// bootstrap and feature subsets from `mix_seed(seed, i)`.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Result<ForestModel, AnalysisError> {
    let m_try = validate(x, y, cfg)?;
    let n = x.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, i as u64));
            let mut in_bag = vec![0u32; n];
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            for &k in &idx {
                in_bag[k] += 1;
            }
            let mut b = Builder { x, y, cfg, m_try, nodes: Vec::new() };
            b.grow(idx, 0, &mut rng);
            Tree { nodes: b.nodes, in_bag }
        })
        .collect();
    Ok(ForestModel { trees, n_features: x[0].len(), seed: cfg.seed })
}

pub fn forest_predict(model: &ForestModel, row: &[f64]) -> Result<f64, AnalysisError> {
    if row.len() != model.n_features {
        return Err(AnalysisError::DimensionMismatch { expected: model.n_features, got: row.len() });
    }
    Ok(model.trees.iter().map(|t| t.predict(row)).sum::<f64>() / model.trees.len() as f64)
}

/// Impurity-decrease importance weighted by node sample fraction, summed over
/// trees and normalised to 1.
pub fn feature_importance(model: &ForestModel) -> Result<Vec<f64>, AnalysisError> {
    let mut vim = vec![0.0; model.n_features];
    for tree in &model.trees {
        let root = tree.nodes[0].n_samples as f64;
        for node in &tree.nodes {
            if let Some((f, _, l, r)) = node.split {
                let (nl, nr) = (&tree.nodes[l], &tree.nodes[r]);
                let n = node.n_samples as f64;
                let child = (nl.n_samples as f64 * nl.impurity + nr.n_samples as f64 * nr.impurity) / n;
                vim[f] += n / root * (node.impurity - child);
            }
        }
    }
    let total: f64 = vim.iter().sum();
    if !(total > 0.0) {
        return Err(AnalysisError::NoSplits);
    }
    Ok(vim.into_iter().map(|v| v / total).collect())
}

/// R² of out-of-bag predictions over rows left out by at least one tree.
pub fn oob_r2(model: &ForestModel, x: &[Vec<f64>], y: &[f64]) -> Result<f64, AnalysisError> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (i, row) in x.iter().enumerate() {
        let outs: Vec<f64> = model.trees.iter().filter(|t| t.in_bag[i] == 0).map(|t| t.predict(row)).collect();
        if !outs.is_empty() {
            pred.push(outs.iter().sum::<f64>() / outs.len() as f64);
            truth.push(y[i]);
        }
    }
    if truth.len() < 2 {
        return Err(AnalysisError::TooFewSamples { needed: 2, got: truth.len() });
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(&pred).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok(1.0 - ss_res / ss_tot)
}
