//! Shared fixtures for the criterion benchmarks.

use imbench_core::data::{synth_generate, SynthConfig};
use imbench_core::stats::BlockMatrix;
use imbench_core::Dataset;

/// Synthetic power-law dataset with 8 features and a fixed seed.
pub fn fixture(n_samples: usize, n_classes: usize) -> Dataset {
    synth_generate(&SynthConfig {
        n_samples,
        n_classes,
        n_features: 8,
        power_law_exponent: 1.0,
        seed: 7,
        ..Default::default()
    })
    .expect("valid fixture config")
}

/// `n_blocks x n_treatments` matrix with deterministic, mostly distinct scores.
pub fn score_matrix(n_blocks: usize, n_treatments: usize) -> BlockMatrix {
    let values = (0..n_blocks)
        .map(|b| {
            (0..n_treatments)
                .map(|t| ((b * 31 + t * 17) % 101) as f64 / 101.0 + t as f64 * 0.01)
                .collect()
        })
        .collect();
    BlockMatrix::new(
        (0..n_blocks).map(|b| format!("b{b}")).collect(),
        (0..n_treatments).map(|t| format!("t{t}")).collect(),
        values,
    )
    .expect("rectangular matrix")
}
