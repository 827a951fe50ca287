//! Fixtures shared by the benchmarks in `benches/`.

use labelind::imputation::TrainingPool;
use labelind::ingest::encode_features;
use labelind::sampling::balanced_subsets;
use labelind::synthgen::{generate, records};
use labelind::GeneratorConfig;

/// Encoded pool of the default synthetic population with `n_cases` cases.
pub fn synthetic_pool(n_cases: usize, detention_rate: f64, seed: u64) -> TrainingPool {
    let config = GeneratorConfig {
        n_cases,
        detention_rate,
        seed,
        ..GeneratorConfig::default()
    };
    let cases = records(&generate(&config).expect("valid generator config"));
    let matrix = encode_features(&cases, &config.schema()).expect("generated cases encode");
    TrainingPool::from_cases(&cases, matrix).expect("generated cases form a pool")
}

/// First balanced subset of a 10k-case pool, the size one grid cell trains on.
pub fn balanced_subset(seed: u64) -> TrainingPool {
    let pool = synthetic_pool(10_000, 0.015, seed);
    let subsets = balanced_subsets(&pool, 25, seed).expect("default population supports 25 subsets");
    pool.select_rows(&subsets[0].rows)
}
