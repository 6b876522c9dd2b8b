use std::io::{Read, Write};

use rayon::prelude::*;

use super::{ExperimentConfig, ExperimentError, UncertaintyMeasure};
use crate::dataset::{extract_windows, load_scene_dir, resample_scene, split_dataset, DatasetSplit, PredictionWindow, Scene};
use crate::ensemble::{ape, ensemble_predict, fpe, mc_dropout_predict, window_seed, EnsemblePrediction};
use crate::evaluation::{ade, fde, RetentionSummary};
use crate::predictor::{train, ModelParams, TrainingConfig};
use crate::synthgen::{generate_dataset_family, generate_scene};

/// Recorded datasets when configured, otherwise the synthetic family (or
/// the single base scene when the family is empty).
pub fn build_datasets(cfg: &ExperimentConfig) -> Result<Vec<(String, Scene)>, ExperimentError> {
    if !cfg.datasets.is_empty() {
        return cfg
            .datasets
            .iter()
            .map(|d| {
                let mut s = load_scene_dir(&d.path)?;
                s.scene_id = d.name.clone();
                Ok((d.name.clone(), s))
            })
            .collect();
    }
    if cfg.family.is_empty() {
        let s = generate_scene(&cfg.synth)?;
        return Ok(vec![(s.scene_id.clone(), s)]);
    }
    Ok(generate_dataset_family(&cfg.synth, &cfg.family)?)
}

#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub name: String,
    /// Scene resampled to the model rate.
    pub scene: Scene,
    pub split: DatasetSplit,
}

pub fn prepare_dataset(name: &str, scene: &Scene, cfg: &ExperimentConfig) -> Result<PreparedDataset, ExperimentError> {
    let scene = resample_scene(scene, cfg.resample_hz)?;
    let windows = extract_windows(&scene, &cfg.windows);
    if windows.is_empty() {
        return Err(ExperimentError::Insufficient { name: name.into(), reason: "no prediction windows".into() });
    }
    let split = split_dataset(&windows, cfg.test_ratio, cfg.seed)?;
    Ok(PreparedDataset { name: name.into(), scene, split })
}

/// `cfg.ensemble_k` members trained concurrently; member `k` uses seed
/// `cfg.seed + k`.
pub fn train_members(
    windows: &[PredictionWindow],
    cfg: &ExperimentConfig,
    dataset: usize,
) -> Result<Vec<ModelParams>, ExperimentError> {
    let base = cfg.training_config();
    (0..cfg.ensemble_k)
        .into_par_iter()
        .map(|k| {
            let tc = TrainingConfig { seed: base.seed.wrapping_add(k as u64), ..base.clone() };
            train(windows, &cfg.model, &tc)
                .map(|(p, _)| p)
                .map_err(|source| ExperimentError::Training { dataset, member: k, source })
        })
        .collect()
}

/// Per-window metrics. `ade_member1` is the first member alone.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub window_id: String,
    pub ade: f64,
    pub fde: f64,
    pub ade_member1: f64,
    pub ape: f64,
    pub fpe: f64,
}

impl EvalRow {
    pub fn uncertainty(&self, m: UncertaintyMeasure) -> f64 {
        match m {
            UncertaintyMeasure::Ape => self.ape,
            UncertaintyMeasure::Fpe => self.fpe,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WindowEval {
    pub row: EvalRow,
    pub prediction: EnsemblePrediction,
}

/// Source of the member predictions for one window.
#[derive(Clone, Debug)]
pub enum Predictor {
    Ensemble(Vec<ModelParams>),
    /// `passes` dropout samples of one model; per-window seeds derive from
    /// `seed` and the window identity.
    McDropout { params: ModelParams, passes: usize, seed: u64 },
}

impl Predictor {
    pub fn predict(&self, w: &PredictionWindow, floor: f64) -> Result<EnsemblePrediction, ExperimentError> {
        Ok(match self {
            Predictor::Ensemble(members) => ensemble_predict(members, w, floor)?,
            Predictor::McDropout { params, passes, seed } => {
                mc_dropout_predict(params, w, *passes, window_seed(*seed, w), floor)?
            }
        })
    }
}

pub fn evaluate_windows(
    predictor: &Predictor,
    windows: &[PredictionWindow],
    variance_floor: f64,
) -> Result<Vec<WindowEval>, ExperimentError> {
    windows
        .par_iter()
        .map(|w| {
            let pred = predictor.predict(w, variance_floor)?;
            let truth = w.future_positions();
            let row = EvalRow {
                window_id: w.id(),
                ade: ade(&pred.mean, &truth)?,
                fde: fde(&pred.mean, &truth)?,
                ade_member1: ade(&pred.member_predictions[0], &truth)?,
                ape: ape(&pred),
                fpe: fpe(&pred),
            };
            Ok(WindowEval { row, prediction: pred })
        })
        .collect()
}

pub fn write_eval_csv<W: Write>(w: W, rows: &[EvalRow]) -> Result<(), ExperimentError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["window_id", "ade", "fde", "ade_member1", "ape", "fpe"])?;
    for r in rows {
        wr.write_record([
            r.window_id.clone(),
            r.ade.to_string(),
            r.fde.to_string(),
            r.ade_member1.to_string(),
            r.ape.to_string(),
            r.fpe.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_eval_csv<R: Read>(r: R) -> Result<Vec<EvalRow>, ExperimentError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, ExperimentError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ExperimentError::Config(format!("bad eval row {:?}", rec.position())))
        };
        out.push(EvalRow {
            window_id: rec.get(0).unwrap_or_default().to_string(),
            ade: num(1)?,
            fde: num(2)?,
            ade_member1: num(3)?,
            ape: num(4)?,
            fpe: num(5)?,
        });
    }
    Ok(out)
}

/// Retention curves of ensemble ADE ordered by the chosen uncertainty.
pub fn retention_from_eval(rows: &[EvalRow], m: UncertaintyMeasure) -> Result<RetentionSummary, ExperimentError> {
    let errors: Vec<f64> = rows.iter().map(|r| r.ade).collect();
    let unc: Vec<f64> = rows.iter().map(|r| r.uncertainty(m)).collect();
    Ok(RetentionSummary::compute(&errors, &unc)?)
}

/// Entry `(i, j)` is trained on dataset `i` and tested on dataset `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossMatrix {
    pub names: Vec<String>,
    pub ade_member1: Vec<Vec<f64>>,
    pub ade_ensemble: Vec<Vec<f64>>,
    pub fde_ensemble: Vec<Vec<f64>>,
    pub ape: Vec<Vec<f64>>,
    pub fpe: Vec<Vec<f64>>,
}

impl CrossMatrix {
    pub fn named(&self) -> [(&'static str, &Vec<Vec<f64>>); 5] {
        [
            ("ade_member1", &self.ade_member1),
            ("ade_ensemble", &self.ade_ensemble),
            ("fde_ensemble", &self.fde_ensemble),
            ("ape", &self.ape),
            ("fpe", &self.fpe),
        ]
    }

    /// Mean diagonal and mean off-diagonal entry of a square matrix.
    pub fn diagonal_vs_off(m: &[Vec<f64>]) -> (f64, f64) {
        let n = m.len();
        let diag = (0..n).map(|i| m[i][i]).sum::<f64>() / n as f64;
        let off: f64 = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| m[i][j]).sum::<f64>()).sum();
        (diag, off / (n * (n - 1)) as f64)
    }
}

#[derive(Clone, Debug)]
pub struct CrossRun {
    pub matrix: CrossMatrix,
    pub prepared: Vec<PreparedDataset>,
    /// In-domain evaluations, one list per dataset.
    pub diagonal: Vec<Vec<WindowEval>>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn run_cross_dataset(datasets: &[(String, Scene)], cfg: &ExperimentConfig) -> Result<CrossRun, ExperimentError> {
    if datasets.len() < 2 {
        return Err(ExperimentError::Config(format!("cross-dataset run needs >= 2 datasets, got {}", datasets.len())));
    }
    cfg.validate()?;
    let prepared: Vec<PreparedDataset> = datasets
        .par_iter()
        .map(|(name, scene)| prepare_dataset(name, scene, cfg))
        .collect::<Result<_, _>>()?;
    let n = prepared.len();
    let mut m = CrossMatrix {
        names: prepared.iter().map(|p| p.name.clone()).collect(),
        ade_member1: vec![vec![0.0; n]; n],
        ade_ensemble: vec![vec![0.0; n]; n],
        fde_ensemble: vec![vec![0.0; n]; n],
        ape: vec![vec![0.0; n]; n],
        fpe: vec![vec![0.0; n]; n],
    };
    let mut diagonal = Vec::with_capacity(n);
    for i in 0..n {
        let members = Predictor::Ensemble(train_members(&prepared[i].split.train, cfg, i)?);
        for j in 0..n {
            let evals = evaluate_windows(&members, &prepared[j].split.test, cfg.variance_floor)?;
            m.ade_member1[i][j] = mean(evals.iter().map(|e| e.row.ade_member1));
            m.ade_ensemble[i][j] = mean(evals.iter().map(|e| e.row.ade));
            m.fde_ensemble[i][j] = mean(evals.iter().map(|e| e.row.fde));
            m.ape[i][j] = mean(evals.iter().map(|e| e.row.ape));
            m.fpe[i][j] = mean(evals.iter().map(|e| e.row.fpe));
            if i == j {
                diagonal.push(evals);
            }
        }
    }
    Ok(CrossRun { matrix: m, prepared, diagonal })
}
