//! Fixtures shared by the criterion benchmarks.

use xcreg_core::{generate_contaminated, SimConfig, SimSample};

/// The default contaminated configuration with `n` subjects.
pub fn noisy_sample(n: usize, seed: u64) -> SimSample {
    generate_contaminated(&SimConfig {
        n,
        seed,
        ..SimConfig::default()
    })
    .expect("default configuration is valid")
}
