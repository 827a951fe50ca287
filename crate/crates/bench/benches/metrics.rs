use criterion::{criterion_group, criterion_main, Criterion};
use labelind::evaluation::{ks_statistic, mcc_scaled, wasserstein_1d};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(2)).collect();
    let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.2).collect();
    let mut g = c.benchmark_group("metrics_20k");
    g.bench_function("mcc_scaled", |bench| bench.iter(|| mcc_scaled(&labels, &a, 0.5).unwrap()));
    g.bench_function("wasserstein_1d", |bench| bench.iter(|| wasserstein_1d(&a, &b).unwrap()));
    g.bench_function("ks_statistic", |bench| bench.iter(|| ks_statistic(&a, &b).unwrap()));
    g.finish();
}

criterion_group!(benches, metrics);
criterion_main!(benches);
