//! Sequential versus pooled execution of the data-parallel kernels. The
//! "sequential" variant runs inside a one-thread rayon pool, which takes the
//! same code path as a build without the `parallel` feature.

use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;
use velotrace::geo::LatLon;
use velotrace::ingest::assemble_trips;
use velotrace::models::forest::{train_forest, ForestParams};
use velotrace::models::lstm::LstmNet;
use velotrace::spatial::build_density_grid;
use velotrace::synth::{generate, SynthConfig};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn small_city() -> SynthConfig {
    SynthConfig {
        start: NaiveDate::from_ymd_opt(2017, 5, 1).unwrap(),
        end: NaiveDate::from_ymd_opt(2017, 5, 4).unwrap(),
        base_trips_per_day: 400.0,
        ..SynthConfig::default()
    }
}

fn forest(c: &mut Criterion) {
    let (n, p) = (2000, 8);
    let x: Vec<f64> = (0..n * p).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let y: Vec<f64> = (0..n).map(|r| x[r * p] * 3.0 + (x[r * p + 1] * 6.0).sin()).collect();
    let params = ForestParams {
        n_trees: 16,
        ..Default::default()
    };
    let mut g = c.benchmark_group("forest_fit");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| train_forest(&x, p, &y, &params, 1).unwrap()))
        });
    }
    g.finish();
}

fn assembly(c: &mut Criterion) {
    let points = generate(&small_city(), true).unwrap().points;
    let mut g = c.benchmark_group("trip_assembly");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(|| points.clone(), |pts| pool.install(|| assemble_trips(pts)), BatchSize::LargeInput)
        });
    }
    g.finish();
}

fn density(c: &mut Criterion) {
    let cfg = small_city();
    let points: Vec<LatLon> = generate(&cfg, true).unwrap().points.iter().filter_map(|p| p.coord).collect();
    let mut g = c.benchmark_group("density_grid");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| build_density_grid(&points, cfg.bbox, 100.0).unwrap()))
        });
    }
    g.finish();
}

fn lstm_epoch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (dim, steps, batch) = (20, 8, 256);
    let net = LstmNet::init(dim, 16, &mut rng);
    let windows: Vec<Vec<f64>> = (0..batch).map(|k| (0..dim * steps).map(|i| ((i + k) % 17) as f64 / 17.0).collect()).collect();
    let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    let targets: Vec<f64> = (0..batch).map(|k| (k % 5) as f64 / 5.0).collect();
    let mut g = c.benchmark_group("lstm_gradient");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| net.loss_and_gradient(&refs, &targets)))
        });
    }
    g.finish();
}

criterion_group!(benches, forest, assembly, density, lstm_epoch);
criterion_main!(benches);
