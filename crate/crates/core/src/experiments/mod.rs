// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Canned measurement protocols returning simulated curves.

mod protocols;
mod pump;
mod scans;
mod spectra;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};

pub use protocols::{PrepId, PrepState, ReadoutScheme};
pub use pump::{differences_from_populations, pump_scan, reconstruct_populations, PumpScan};
pub use scans::{echo_scan, fid_scan, rabi_scan, t1_alpha_scan, t1_gamma_scan};
pub use spectra::{cw_spectrum, double_resonance_spectrum, feature_near, local_feature, steady_state_with_rf};

/// Stream offset keeping measurement noise independent of the ensemble draws.
const NOISE_STREAM: u64 = 0x6e6f_6973_655f_7631;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CurveMeta {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    /// Unit of the abscissa.
    pub x_unit: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: CurveMeta,
}

impl Curve {
    pub fn new(x: Vec<f64>, y: Vec<f64>, experiment: impl Into<String>, x_unit: &str, cfg: &SimConfig) -> Result<Self> {
        check_grid(&x)?;
        if x.len() != y.len() {
            return Err(Error::Experiment(format!("curve has {} abscissae but {} values", x.len(), y.len())));
        }
        Ok(Self {
            x,
            y,
            meta: CurveMeta {
                experiment: experiment.into(),
                config_hash: cfg.hash(),
                seed: cfg.inhomogeneity.seed,
                x_unit: x_unit.to_string(),
                extras: BTreeMap::new(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Adds seeded Gaussian noise of standard deviation `sigma`.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(crate::error::invalid("experiments", "noise_sigma", format!("must be >= 0, got {sigma}")));
        }
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            for y in &mut self.y {
                *y += normal.sample(&mut rng);
            }
            self.meta.extras.insert("noise_sigma".into(), sigma);
        }
        Ok(self)
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.meta.extras.insert(key.into(), value);
        self
    }
}

/// Grids must be finite and strictly increasing.
pub fn check_grid(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Experiment("grid contains non-finite values".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Experiment("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_nonnegative(x: &[f64], name: &str) -> Result<()> {
    check_grid(x)?;
    if x.first().is_some_and(|&v| v < 0.0) {
        return Err(Error::Experiment(format!("{name} grid must be >= 0")));
    }
    Ok(())
}

/// Evaluates `f` on every grid point in parallel, keeping grid order.
fn evaluate<F>(grid: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    grid.par_iter().map(|&x| f(x)).collect()
}
