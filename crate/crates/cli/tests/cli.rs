use std::path::Path;

use trajuq::experiment::{read_eval_csv, retention_from_eval, ExperimentConfig};
use trajuq::evaluation::{write_auc_csv, write_curves_csv, write_scores_csv};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["trajuq"];
    argv.extend_from_slice(args);
    trajuq_cli::run(argv)
}

fn small_config(dir: &Path) -> String {
    let mut cfg = ExperimentConfig::default();
    cfg.ensemble_k = 2;
    cfg.synth.n_tracks = 24;
    cfg.synth.duration_s = 80.0;
    cfg.model.hidden = 6;
    cfg.training.epochs = 1;
    cfg.training.batch_size = 32;
    cfg.forest.n_trees = 5;
    let p = dir.join("cfg.toml");
    std::fs::write(&p, cfg.to_toml()).unwrap();
    p.display().to_string()
}

#[test]
fn cross_smoke_writes_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("runs/demo");
    assert_eq!(run(&["cross", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    for m in ["ade_member1", "ade_ensemble", "fde_ensemble", "ape", "fpe"] {
        let csv = std::fs::read_to_string(out.join(format!("cross_{m}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3, "{m}");
        assert!(out.join(format!("heatmap_{m}.svg")).exists());
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["cross"]), 1);
    assert_eq!(run(&["--config", "x.toml", "frobnicate"]), 1);
    assert_eq!(run(&["--config", "x.toml", "cross", "--bogus"]), 1);
    assert_eq!(run(&[]), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["cross", "--help"]), 0);
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["--config", "/nonexistent/cfg.toml", "--out", o, "synth"]), 2);
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "ensemble_k = 1\n").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "--out", o, "synth"]), 2);
    let cfg = small_config(tmp.path());
    assert_eq!(run(&["--config", &cfg, "--out", o, "eval", "--models", "/nonexistent"]), 2);
    assert_eq!(run(&["--config", &cfg, "--out", o, "train", "--dataset", "nope"]), 2);
}

#[test]
fn retention_command_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let dir = |s: &str| tmp.path().join(s).display().to_string();
    assert_eq!(run(&["--config", &cfg, "--out", &dir("m"), "train", "--ensemble", "2"]), 0);
    assert_eq!(run(&["--config", &cfg, "--out", &dir("e"), "eval", "--models", &dir("m")]), 0);
    let eval = tmp.path().join("e/eval.csv");
    assert_eq!(run(&["--config", &cfg, "--out", &dir("r"), "retention", "--input", eval.to_str().unwrap()]), 0);

    let rows = read_eval_csv(std::fs::File::open(&eval).unwrap()).unwrap();
    let summary = retention_from_eval(&rows, ExperimentConfig::default().uncertainty).unwrap();
    let curves = summary.curves();
    let mut expect = Vec::new();
    write_curves_csv(&mut expect, &curves).unwrap();
    assert_eq!(std::fs::read(tmp.path().join("r/retention_curves.csv")).unwrap(), expect);
    let mut expect = Vec::new();
    write_scores_csv(&mut expect, &summary.uncertainty.fractions, &summary.scores).unwrap();
    assert_eq!(std::fs::read(tmp.path().join("r/retention_scores.csv")).unwrap(), expect);
    let mut expect = Vec::new();
    write_auc_csv(&mut expect, &curves).unwrap();
    assert_eq!(std::fs::read(tmp.path().join("r/retention_auc.csv")).unwrap(), expect);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let dir = |s: &str| tmp.path().join(s).display().to_string();
    assert_eq!(run(&["--config", &cfg, "--serial", "--out", &dir("a"), "train"]), 0);
    assert_eq!(run(&["--config", &cfg, "--serial", "--seed", "9", "--out", &dir("b"), "train"]), 0);
    let a = std::fs::read(tmp.path().join("a/member_00.ckpt")).unwrap();
    let b = std::fs::read(tmp.path().join("b/member_00.ckpt")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn demo_config_parses() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    ExperimentConfig::load(&demo).unwrap();
}
