use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pipeline::{write_eval_csv, CrossRun, EvalRow};
use super::svg::{heatmap_svg, line_plot_svg, Series};
use super::{retention_from_eval, ExperimentConfig, ExperimentError};
use crate::analysis::{
    correlation_report, importance_report, write_category_csv, write_correlation_csv, write_importance_csv,
    PerformanceRow,
};
use crate::evaluation::{write_auc_csv, write_curves_csv, write_scores_csv, RetentionSummary};
use crate::features::{feature_table, write_feature_csv, FeatureVector};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    /// Effective configuration, TOML.
    pub config: String,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self { config_hash: cfg.hash(), config: cfg.to_toml(), files: Vec::new() }
    }

    /// Writes `bytes` to `dir/name` and records its checksum.
    pub fn add(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        std::fs::write(dir.join(name), bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

pub fn write_matrix_csv<W: Write>(w: W, names: &[String], m: &[Vec<f64>]) -> Result<(), ExperimentError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(std::iter::once("train\\test".to_string()).chain(names.iter().cloned()))?;
    for (name, row) in names.iter().zip(m) {
        wr.write_record(std::iter::once(name.clone()).chain(row.iter().map(|v| v.to_string())))?;
    }
    wr.flush()?;
    Ok(())
}

fn buf<F>(f: F) -> Result<Vec<u8>, ExperimentError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), ExperimentError>,
{
    let mut b = Vec::new();
    f(&mut b)?;
    Ok(b)
}

/// Retention CSVs and plots for one set of evaluations.
pub fn add_retention(
    manifest: &mut Manifest,
    dir: &Path,
    summary: &RetentionSummary,
) -> Result<(), ExperimentError> {
    let curves = summary.curves();
    manifest.add(dir, "retention_curves.csv", &buf(|b| Ok(write_curves_csv(b, &curves)?))?)?;
    let fr = &summary.uncertainty.fractions;
    manifest.add(dir, "retention_scores.csv", &buf(|b| Ok(write_scores_csv(b, fr, &summary.scores)?))?)?;
    manifest.add(dir, "retention_auc.csv", &buf(|b| Ok(write_auc_csv(b, &curves)?))?)?;
    let series: Vec<Series> =
        curves.iter().map(|c| Series { label: c.mode.as_str(), x: &c.fractions, y: &c.values }).collect();
    manifest.add(dir, "retention_curves.svg", line_plot_svg("Error retention", "ADE (m)", &series).as_bytes())?;
    let score = [Series { label: "score", x: fr, y: &summary.scores }];
    manifest.add(dir, "retention_scores.svg", line_plot_svg("Retention score", "score", &score).as_bytes())?;
    Ok(())
}

pub fn performance_rows(rows: &[EvalRow]) -> Vec<PerformanceRow> {
    rows.iter()
        .map(|r| PerformanceRow { window_id: r.window_id.clone(), ade: r.ade, fde: r.fde, ape: r.ape, fpe: r.fpe })
        .collect()
}

/// Correlation, importance and category CSVs.
pub fn add_analysis(
    manifest: &mut Manifest,
    dir: &Path,
    cfg: &ExperimentConfig,
    features: &[FeatureVector],
    rows: &[EvalRow],
) -> Result<(), ExperimentError> {
    let perf = performance_rows(rows);
    let radii = &cfg.features.interaction.radii_m;
    let corr = correlation_report(features, &perf, radii)?;
    manifest.add(dir, "correlation.csv", &buf(|b| Ok(write_correlation_csv(b, &corr)?))?)?;
    manifest.add(dir, "categories.csv", &buf(|b| Ok(write_category_csv(b, &corr.categories)?))?)?;
    let imp = importance_report(features, &perf, radii, &cfg.forest_config())?;
    manifest.add(dir, "importance.csv", &buf(|b| Ok(write_importance_csv(b, &imp)?))?)?;
    Ok(())
}

/// Writes every artifact of a cross-dataset run plus `manifest.json`.
/// Retention and feature analyses pool the in-domain test sets.
pub fn emit_report(run: &CrossRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest::new(cfg);
    manifest.add(dir, "config.toml", cfg.to_toml().as_bytes())?;
    let m = &run.matrix;
    for (name, mat) in m.named() {
        manifest.add(dir, &format!("cross_{name}.csv"), &buf(|b| write_matrix_csv(b, &m.names, mat))?)?;
        manifest.add(dir, &format!("heatmap_{name}.svg"), heatmap_svg(name, &m.names, mat).as_bytes())?;
    }

    let rows: Vec<EvalRow> = run.diagonal.iter().flatten().map(|e| e.row.clone()).collect();
    manifest.add(dir, "eval.csv", &buf(|b| write_eval_csv(b, &rows))?)?;
    add_retention(&mut manifest, dir, &retention_from_eval(&rows, cfg.uncertainty)?)?;

    let mut features = Vec::with_capacity(rows.len());
    for p in &run.prepared {
        features.extend(feature_table(&p.scene, &p.split.test, &cfg.features)?);
    }
    let radii = &cfg.features.interaction.radii_m;
    manifest.add(dir, "features.csv", &buf(|b| Ok(write_feature_csv(b, &features, radii)?))?)?;
    add_analysis(&mut manifest, dir, cfg, &features, &rows)?;
    manifest.write(dir)?;
    Ok(manifest)
}
