use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajuq::analysis::{fit_forest, ForestConfig};
use trajuq::dataset::{extract_windows, resample_scene, WindowParams};
use trajuq::evaluation::{retention_curve, RetentionMode};
use trajuq::predictor::{forward, init_model, loss_and_gradients, EncodedWindow};
use trajuq::synthgen::{generate_scene, GeneratorConfig};

fn windows() -> Vec<trajuq::dataset::PredictionWindow> {
    let mut cfg = GeneratorConfig::default();
    cfg.n_tracks = 30;
    cfg.duration_s = 90.0;
    let scene = resample_scene(&generate_scene(&cfg).unwrap(), 2.0).unwrap();
    extract_windows(&scene, &WindowParams::default())
}

fn bench_network(c: &mut Criterion) {
    let ws = windows();
    let params = init_model(&Default::default(), 0);
    let encoded: Vec<EncodedWindow> = ws.iter().take(32).map(|w| EncodedWindow::new(w).unwrap()).collect();
    c.bench_function("forward", |b| b.iter(|| forward(&params, black_box(&ws[0]), None).unwrap()));
    c.bench_function("loss_and_gradients_batch32", |b| {
        b.iter(|| loss_and_gradients(&params, black_box(&encoded), None, 1e-4).unwrap())
    });
}

fn bench_forest(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<Vec<f64>> = (0..500).map(|_| (0..10).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let y: Vec<f64> = x.iter().map(|r| r[0] + 0.5 * r[3] + rng.gen_range(-0.1..0.1)).collect();
    let cfg = ForestConfig { n_trees: 20, ..Default::default() };
    c.bench_function("fit_forest_500x10", |b| b.iter(|| fit_forest(black_box(&x), &y, &cfg).unwrap()));
}

fn bench_retention(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let e: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..5.0)).collect();
    let u: Vec<f64> = e.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
    c.bench_function("retention_curve_10k", |b| {
        b.iter(|| retention_curve(black_box(&e), &u, RetentionMode::Uncertainty).unwrap())
    });
}

criterion_group!(benches, bench_network, bench_forest, bench_retention);
criterion_main!(benches);
