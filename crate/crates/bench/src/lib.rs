//! Shared inputs for the kernel benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rocktype::synth::{gen_benchmark, BenchmarkSpec};
use rocktype::{assemble_matrix, FeatureMatrix, FeatureSpec, WellFrame};

/// Random labels and scores with ties on a coarse score grid.
pub fn scored_labels(n: usize, seed: u64) -> (Vec<u8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = (0..n).map(|_| u8::from(rng.random_bool(0.13))).collect();
    let s = (0..n).map(|_| f64::from(rng.random_range(0..1000u32)) / 1000.0).collect();
    (y, s)
}

/// Frames of a small synthetic benchmark.
pub fn frames(n_wells: usize) -> Vec<WellFrame> {
    let spec = BenchmarkSpec { n_wells, ..BenchmarkSpec::default() };
    gen_benchmark(&spec).expect("default benchmark generates").frames()
}

pub fn matrix(n_wells: usize, spec: &FeatureSpec) -> FeatureMatrix {
    assemble_matrix(&frames(n_wells), spec).expect("features assemble")
}
