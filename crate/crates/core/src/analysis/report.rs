use std::io::Write;

use super::{feature_importance, fit_forest, spearman, AnalysisError, ForestConfig};
use crate::features::FeatureVector;

const CATEGORICAL_NAMES: [&str; 4] = FeatureVector::CATEGORICAL_NAMES;

pub const METRIC_NAMES: [&str; 4] = ["ADE", "FDE", "APE", "FPE"];

/// Per-window performance, aligned with a feature row by `window_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceRow {
    pub window_id: String,
    pub ade: f64,
    pub fde: f64,
    pub ape: f64,
    pub fpe: f64,
}

impl PerformanceRow {
    pub fn metrics(&self) -> [f64; 4] {
        [self.ade, self.fde, self.ape, self.fpe]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategorySummary {
    pub feature: String,
    pub category: String,
    pub count: usize,
    pub mean: [f64; 4],
    pub median: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub feature_names: Vec<String>,
    /// `rho[f][m]`; `None` when the feature or metric column is constant.
    pub rho: Vec<[Option<f64>; 4]>,
    pub categories: Vec<CategorySummary>,
}

fn check_aligned(features: &[FeatureVector], perf: &[PerformanceRow]) -> Result<(), AnalysisError> {
    if features.len() != perf.len() {
        return Err(AnalysisError::LengthMismatch(features.len(), perf.len()));
    }
    if let Some((f, p)) = features.iter().zip(perf).find(|(f, p)| f.window_id != p.window_id) {
        return Err(AnalysisError::Misaligned(format!("{} vs {}", f.window_id, p.window_id)));
    }
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Count, mean and median of every metric per category label.
pub fn category_summary(features: &[FeatureVector], perf: &[PerformanceRow]) -> Result<Vec<CategorySummary>, AnalysisError> {
    check_aligned(features, perf)?;
    let mut out = Vec::new();
    for (c, name) in CATEGORICAL_NAMES.iter().enumerate() {
        let mut groups: std::collections::BTreeMap<String, Vec<[f64; 4]>> = Default::default();
        for (f, p) in features.iter().zip(perf) {
            groups.entry(f.categorical_labels()[c].clone()).or_default().push(p.metrics());
        }
        for (category, rows) in groups {
            let mut mean = [0.0; 4];
            let mut med = [0.0; 4];
            for m in 0..4 {
                let mut col: Vec<f64> = rows.iter().map(|r| r[m]).collect();
                mean[m] = col.iter().sum::<f64>() / col.len() as f64;
                med[m] = median(&mut col);
            }
            out.push(CategorySummary { feature: name.to_string(), category, count: rows.len(), mean, median: med });
        }
    }
    Ok(out)
}

pub fn correlation_report(
    features: &[FeatureVector],
    perf: &[PerformanceRow],
    radii: &[f64],
) -> Result<CorrelationReport, AnalysisError> {
    check_aligned(features, perf)?;
    let feature_names = FeatureVector::numeric_names(radii);
    let table: Vec<Vec<f64>> = features.iter().map(|f| f.numeric_values()).collect();
    let mut rho = Vec::with_capacity(feature_names.len());
    for j in 0..feature_names.len() {
        let col: Vec<f64> = table.iter().map(|r| r[j]).collect();
        let mut row = [None; 4];
        for (m, slot) in row.iter_mut().enumerate() {
            let metric: Vec<f64> = perf.iter().map(|p| p.metrics()[m]).collect();
            *slot = match spearman(&col, &metric) {
                Ok(r) => Some(r),
                Err(AnalysisError::ConstantInput) => None,
                Err(e) => return Err(e),
            };
        }
        rho.push(row);
    }
    Ok(CorrelationReport { feature_names, rho, categories: category_summary(features, perf)? })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    /// `vim[m][f]` for each metric that could be attributed.
    pub vim: Vec<(String, Vec<f64>)>,
}

/// One forest per metric over numeric features plus categorical codes.
pub fn importance_report(
    features: &[FeatureVector],
    perf: &[PerformanceRow],
    radii: &[f64],
    cfg: &ForestConfig,
) -> Result<ImportanceReport, AnalysisError> {
    check_aligned(features, perf)?;
    let mut feature_names = FeatureVector::numeric_names(radii);
    feature_names.extend(CATEGORICAL_NAMES.iter().map(|s| s.to_string()));
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            let mut r = f.numeric_values();
            r.extend(f.categorical_codes());
            r
        })
        .collect();
    let mut vim = Vec::new();
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let y: Vec<f64> = perf.iter().map(|p| p.metrics()[m]).collect();
        let forest = fit_forest(&x, &y, cfg)?;
        match feature_importance(&forest) {
            Ok(v) => vim.push((name.to_string(), v)),
            Err(AnalysisError::NoSplits) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(ImportanceReport { feature_names, vim })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_correlation_csv<W: Write>(w: W, report: &CorrelationReport) -> Result<(), AnalysisError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(std::iter::once("feature").chain(METRIC_NAMES))?;
    for (name, row) in report.feature_names.iter().zip(&report.rho) {
        wr.write_record(std::iter::once(name.clone()).chain(row.iter().map(|v| opt(*v))))?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_importance_csv<W: Write>(w: W, report: &ImportanceReport) -> Result<(), AnalysisError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["metric", "feature", "vim"])?;
    for (metric, v) in &report.vim {
        for (f, x) in report.feature_names.iter().zip(v) {
            wr.write_record([metric.as_str(), f.as_str(), &x.to_string()])?;
        }
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_category_csv<W: Write>(w: W, rows: &[CategorySummary]) -> Result<(), AnalysisError> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["feature".to_string(), "category".into(), "count".into()];
    for m in METRIC_NAMES {
        header.push(format!("mean_{m}"));
        header.push(format!("median_{m}"));
    }
    wr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.feature.clone(), r.category.clone(), r.count.to_string()];
        for m in 0..4 {
            rec.push(r.mean[m].to_string());
            rec.push(r.median[m].to_string());
        }
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Behavior, CategoricalFeatures, Compliance, InteractionFeatures, KinematicFeatures, LocationStage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(i: usize, cv: f64, behavior: Behavior) -> FeatureVector {
        FeatureVector {
            window_id: format!("s:{i}:0"),
            kinematic: KinematicFeatures { cv, ..Default::default() },
            interaction: InteractionFeatures { per_radius: vec![] },
            categorical: CategoricalFeatures {
                behavior,
                compliance: Compliance::Unknown,
                location_stage: LocationStage::Outside,
                agent_type: crate::AgentType::SmallVehicle,
            },
        }
    }

    fn perf(i: usize, ade: f64) -> PerformanceRow {
        PerformanceRow { window_id: format!("s:{i}:0"), ade, fde: 2.0 * ade, ape: ade - 1.0, fpe: ade }
    }

    #[test]
    fn feature_equal_to_ade_gives_unit_rho() {
        let f: Vec<_> = (0..10).map(|i| row(i, i as f64 * 0.3, Behavior::Straight)).collect();
        let p: Vec<_> = (0..10).map(|i| perf(i, i as f64 * 0.3)).collect();
        let r = correlation_report(&f, &p, &[]).unwrap();
        let cv = r.feature_names.iter().position(|n| n == "CV").unwrap();
        assert_eq!(r.rho[cv], [Some(1.0); 4]);
        let avht = r.feature_names.iter().position(|n| n == "AVHT").unwrap();
        assert_eq!(r.rho[avht], [None; 4]);
    }

    #[test]
    fn noise_feature_is_uncorrelated() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<_> = (0..500).map(|i| row(i, rng.gen::<f64>(), Behavior::Straight)).collect();
            let p: Vec<_> = (0..500).map(|i| perf(i, rng.gen::<f64>())).collect();
            let r = correlation_report(&f, &p, &[]).unwrap();
            let cv = r.feature_names.iter().position(|n| n == "CV").unwrap();
            assert!(r.rho[cv][0].unwrap().abs() < 0.15);
        }
    }

    #[test]
    fn category_statistics() {
        let f = vec![row(0, 1.0, Behavior::Left), row(1, 1.0, Behavior::Left), row(2, 1.0, Behavior::Left), row(3, 1.0, Behavior::Right)];
        let p = vec![perf(0, 1.0), perf(1, 5.0), perf(2, 3.0), perf(3, 2.0)];
        let s = category_summary(&f, &p).unwrap();
        let left = s.iter().find(|c| c.feature == "behavior" && c.category == "left").unwrap();
        assert_eq!(left.count, 3);
        assert_eq!(left.mean[0], 3.0);
        assert_eq!(left.median[0], 3.0);
        assert_eq!(left.median[1], 6.0);
    }

    #[test]
    fn misaligned_rows_rejected() {
        let f = vec![row(0, 1.0, Behavior::Left)];
        let p = vec![perf(1, 1.0)];
        assert!(matches!(category_summary(&f, &p), Err(AnalysisError::Misaligned(_))));
    }
}
