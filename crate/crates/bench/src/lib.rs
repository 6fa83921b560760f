// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Shared inputs for the benchmarks.

use odmr_core::engine::InhomogeneityModel;
use odmr_core::{PopulationVector, SimConfig};

pub fn grid(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * step).collect()
}

/// Fixed, normalized but otherwise arbitrary populations.
pub fn sample_states(n: usize) -> Vec<PopulationVector> {
    (0..n)
        .map(|i| {
            let w = [1.0 + (i % 3) as f64, 2.0, 0.5 + (i % 5) as f64, 1.0 + (i % 7) as f64 * 0.25];
            let s: f64 = w.iter().sum();
            PopulationVector(w.map(|v| v / s))
        })
        .collect()
}

/// Default configuration with `n_samples` ensemble members.
pub fn config_with_samples(n_samples: usize) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.inhomogeneity = InhomogeneityModel { n_samples, ..cfg.inhomogeneity };
    cfg
}
