//! Shared fixtures for the criterion benches in `benches/`.

use mtfwfm::complexity::{random_instances, random_params};
use mtfwfm::{ModelConfig, ModelKind, ModelParams, ScoredSample, SparseInstance};

/// Reference shape: 17 fields, 10 000 features, 4 types, K = 8.
pub const N: usize = 17;
pub const M: usize = 10_000;
pub const T: usize = 4;
pub const K: usize = 8;

pub fn reference_model(kind: ModelKind, seed: u64) -> (ModelParams, Vec<SparseInstance>) {
    model(kind, N, M, T, K, 1024, seed)
}

pub fn model(
    kind: ModelKind,
    n: usize,
    m: usize,
    t: usize,
    k: usize,
    instances: usize,
    seed: u64,
) -> (ModelParams, Vec<SparseInstance>) {
    let config = ModelConfig::uniform(kind, n, m, t, k).expect("valid bench shape");
    let params = random_params(&config, seed).expect("valid bench shape");
    let data = random_instances(&config, instances, seed + 1);
    (params, data)
}

/// Scores with many ties (rounded to 1/256) and roughly balanced labels.
pub fn scored(n: usize, seed: u64) -> Vec<ScoredSample> {
    let config = ModelConfig::uniform(ModelKind::MtFwfm, 2, 512, 3, 1).expect("valid shape");
    random_instances(&config, n, seed)
        .into_iter()
        .map(|inst| ScoredSample {
            score: f64::from(inst.active[0] % 256) / 256.0,
            label: inst.label,
            conv_type: inst.conv_type,
        })
        .collect()
}
