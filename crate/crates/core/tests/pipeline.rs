use trajuq::dataset::{load_scene_dir, write_scene_dir};
use trajuq::experiment::{
    build_datasets, emit_report, heatmap_svg, prepare_dataset, run_cross_dataset, ExperimentConfig, MANIFEST_FILE,
};
use trajuq::features::{feature_table, window_features, write_feature_csv};
use trajuq::predictor::ModelConfig;
use trajuq::synthgen::{generate_scene, ConfigOverride, GeneratorConfig};
use trajuq::TrainingConfig;

fn tiny(family: Vec<ConfigOverride>) -> ExperimentConfig {
    ExperimentConfig {
        ensemble_k: 2,
        synth: GeneratorConfig { n_tracks: 24, duration_s: 80.0, ..Default::default() },
        family,
        model: ModelConfig { hidden: 6, dropout_rate: 0.0 },
        training: TrainingConfig { epochs: 1, batch_size: 32, ..Default::default() },
        forest: trajuq::analysis::ForestConfig { n_trees: 5, ..Default::default() },
        ..Default::default()
    }
}

fn named(n: &str) -> ConfigOverride {
    ConfigOverride { name: Some(n.into()), ..Default::default() }
}

#[test]
fn generated_scene_survives_disk_round_trip() {
    let scene = generate_scene(&GeneratorConfig { n_tracks: 12, duration_s: 40.0, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scene_dir(dir.path(), &scene).unwrap();
    let back = load_scene_dir(dir.path()).unwrap();
    assert_eq!(back.tracks, scene.tracks);
    assert_eq!(back.map, scene.map);
    assert_eq!(back.signals, scene.signals);
}

#[test]
fn feature_table_rows_match_single_window_features() {
    let cfg = tiny(vec![named("a"), named("b")]);
    let (name, scene) = build_datasets(&cfg).unwrap().remove(0);
    let p = prepare_dataset(&name, &scene, &cfg).unwrap();
    let table = feature_table(&p.scene, &p.split.test, &cfg.features).unwrap();
    assert_eq!(table.len(), p.split.test.len());
    for (row, w) in table.iter().zip(&p.split.test) {
        assert_eq!(row, &window_features(&p.scene, w, &cfg.features).unwrap());
    }
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &table, &cfg.features.interaction.radii_m).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 9 + 4 * 4 + 4);
    assert_eq!(header[0], "window_id");
    assert_eq!(text.lines().count(), table.len() + 1);
}

#[test]
fn three_datasets_give_three_by_three_matrices() {
    let cfg = tiny(vec![named("a"), named("b"), named("c")]);
    let run = run_cross_dataset(&build_datasets(&cfg).unwrap(), &cfg).unwrap();
    for (_, m) in run.matrix.named() {
        assert_eq!(m.len(), 3);
        assert!(m.iter().all(|r| r.len() == 3 && r.iter().all(|v| v.is_finite())));
    }
    assert_eq!(run.diagonal.len(), 3);
}

#[test]
fn identical_datasets_give_identical_rows() {
    let same = |n: &str| ConfigOverride { name: Some(n.into()), seed: Some(11), ..Default::default() };
    let cfg = tiny(vec![same("x"), same("y")]);
    let mut data = build_datasets(&cfg).unwrap();
    // scene ids differ by name only; align them so windows coincide
    for (_, s) in &mut data {
        s.scene_id = "shared".into();
    }
    let m = run_cross_dataset(&data, &cfg).unwrap().matrix;
    for (_, mat) in m.named() {
        assert_eq!(mat[0], mat[1]);
    }
}

#[test]
fn report_is_complete_and_reproducible() {
    let cfg = tiny(vec![named("a"), named("b")]);
    let data = build_datasets(&cfg).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m1 = emit_report(&run_cross_dataset(&data, &cfg).unwrap(), &cfg, d1.path()).unwrap();
    let m2 = emit_report(&run_cross_dataset(&data, &cfg).unwrap(), &cfg, d2.path()).unwrap();
    assert!(m1.files.len() >= 8);
    assert_eq!(m1, m2);
    assert_eq!(m1.config_hash, cfg.hash());
    for f in &m1.files {
        let a = std::fs::read(d1.path().join(&f.path)).unwrap();
        assert_eq!(a, std::fs::read(d2.path().join(&f.path)).unwrap(), "{}", f.path);
        assert_eq!(a.len() as u64, f.bytes);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d1.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), m1.files.len());
    let svg = std::fs::read_to_string(d1.path().join("heatmap_ade_ensemble.svg")).unwrap();
    assert_eq!(svg.matches(r#"<rect class="cell""#).count(), 4);
}

#[test]
fn heatmap_cells_scale_with_dataset_count() {
    for n in 1..5 {
        let names: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let m = vec![vec![0.5; n]; n];
        assert_eq!(heatmap_svg("x", &names, &m).matches(r#"<rect class="cell""#).count(), n * n);
    }
}
