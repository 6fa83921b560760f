// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sequence::{run_sequence, EngineConfig, PulseEvent, PulseSequence};
use crate::error::{invalid, Error, Result};

/// Spreads (MHz) calibrated against [`MEASURED_T2_STAR`].
pub const DEFAULT_SIGMA_D: f64 = 2.0425;
pub const DEFAULT_SIGMA_B: f64 = 0.6575;

/// Measured FID 1/e times per transition, µs.
pub const MEASURED_T2_STAR: [f64; 3] = [0.046, 0.333, 0.066];

/// Gaussian spreads of the zero-field splitting (`sigma_d`) and of the
/// Zeeman shift (`sigma_b`), both MHz, sampled `n_samples` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InhomogeneityModel {
    pub sigma_d: f64,
    pub sigma_b: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for InhomogeneityModel {
    fn default() -> Self {
        Self { sigma_d: DEFAULT_SIGMA_D, sigma_b: DEFAULT_SIGMA_B, n_samples: 10_000, seed: 1729 }
    }
}

impl InhomogeneityModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_d", self.sigma_d), ("sigma_b", self.sigma_b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("coherent-engine", name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.n_samples == 0 {
            return Err(invalid("coherent-engine", "n_samples", "must be >= 1"));
        }
        Ok(())
    }

    /// No spread at all: every ensemble member is identical.
    pub fn is_trivial(&self) -> bool {
        self.sigma_d == 0.0 && self.sigma_b == 0.0
    }
}

/// Seeded (ΔD, Δν0) draws in MHz, generated sequentially from one stream.
pub fn draw_samples(model: &InhomogeneityModel) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    (0..model.n_samples)
        .map(|_| {
            let zd: f64 = StandardNormal.sample(&mut rng);
            let zb: f64 = StandardNormal.sample(&mut rng);
            (model.sigma_d * zd, model.sigma_b * zb)
        })
        .collect()
}

/// Per-transition detuning of one ensemble member.
pub fn detuning_shifts(d_shift: f64, b_shift: f64) -> [f64; 3] {
    [-2.0 * d_shift + b_shift, b_shift, 2.0 * d_shift + b_shift]
}

/// Ramsey events: optical prep, π/2, free evolution `tau`, π/2 at `phase`,
/// readout. Transition 2 is bracketed by π pulses on transition 3 so that it
/// carries a population difference after the laser.
pub fn ramsey_events(transition: u8, tau: f64, phase: f64, drive_frequency: Option<f64>, laser: (f64, f64)) -> Vec<PulseEvent> {
    let mut ev = vec![PulseEvent::Laser { duration: laser.0, intensity: laser.1 }];
    if transition == 2 {
        ev.push(PulseEvent::pi(3));
    }
    ev.push(PulseEvent::Rf { transition, flip_angle: FRAC_PI_2, phase: 0.0, drive_frequency, duration: 0.0, rabi_t2: None });
    ev.push(PulseEvent::Delay { duration: tau });
    ev.push(PulseEvent::rf(transition, FRAC_PI_2, phase));
    if transition == 2 {
        ev.push(PulseEvent::pi(3));
    }
    ev.push(PulseEvent::Readout { duration: 4.0 });
    ev
}

/// Phase-cycled Ramsey signal (second pulse at `phase` minus `phase + π`).
pub fn ramsey_signal(transition: u8, tau: f64, phase: f64, cfg: &EngineConfig, laser: (f64, f64)) -> Result<f64> {
    let seq = PulseSequence::with_reference(
        ramsey_events(transition, tau, phase, None, laser),
        ramsey_events(transition, tau, phase + PI, None, laser),
    );
    run_sequence(&seq, cfg)
}

fn envelope(transition: u8, tau: f64, cfg: &EngineConfig, laser: (f64, f64)) -> Result<f64> {
    let x = ramsey_signal(transition, tau, 0.0, cfg, laser)?;
    let y = ramsey_signal(transition, tau, FRAC_PI_2, cfg, laser)?;
    Ok(x.hypot(y))
}

/// 1/e times (µs) of the simulated resonant FID envelope for each transition.
pub fn ensemble_statistics(cfg: &EngineConfig, laser: (f64, f64)) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let transition = k as u8 + 1;
        let e0 = envelope(transition, 0.0, cfg, laser)?;
        if e0 == 0.0 {
            return Err(Error::Experiment("FID envelope vanishes at zero delay".into()));
        }
        let target = e0 / std::f64::consts::E;
        let above = |tau: f64| envelope(transition, tau, cfg, laser).map(|e| e > target);
        let mut lo = 0.0;
        let mut hi = 0.002;
        while above(hi)? {
            lo = hi;
            hi *= 1.25;
            if hi > 1e3 {
                return Err(Error::Experiment(format!("FID envelope of transition {transition} does not decay")));
            }
        }
        for _ in 0..60 {
            if hi - lo <= 1e-7 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if above(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *slot = 0.5 * (lo + hi);
    }
    Ok(out)
}

/// 1/e time of exp(−t/T2 − (2πσt)²/2), µs.
pub fn gaussian_envelope_time(sigma: f64, t2_hom: f64) -> f64 {
    let a = 0.5 * (2.0 * PI * sigma).powi(2);
    let b = 1.0 / t2_hom;
    if a == 0.0 {
        return t2_hom;
    }
    // Rationalized root of a t² + b t − 1 = 0, stable for small a.
    2.0 / (b + (b * b + 4.0 * a).sqrt())
}

/// Envelope 1/e times predicted for a given (σ_D, σ_B).
pub fn predicted_t2_star(sigma_d: f64, sigma_b: f64, t2_hom: [f64; 3]) -> [f64; 3] {
    let outer = (4.0 * sigma_d * sigma_d + sigma_b * sigma_b).sqrt();
    [
        gaussian_envelope_time(outer, t2_hom[0]),
        gaussian_envelope_time(sigma_b, t2_hom[1]),
        gaussian_envelope_time(outer, t2_hom[2]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub sigma_d: f64,
    pub sigma_b: f64,
    pub predicted: [f64; 3],
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Chooses σ_B from the transition-2 target, then σ_D so that the relative
/// errors on transitions 1 and 3 (which share one spread) are balanced.
pub fn calibrate_inhomogeneity(targets: [f64; 3], t2_hom: [f64; 3]) -> Result<Calibration> {
    if targets.iter().chain(t2_hom.iter()).any(|v| !(*v > 0.0)) {
        return Err(invalid("coherent-engine", "targets", "targets and t2_hom must be > 0"));
    }
    let sigma_b = if targets[1] >= t2_hom[1] {
        0.0
    } else {
        bisect_decreasing(|s| gaussian_envelope_time(s, t2_hom[1]) - targets[1], 0.0, 1e4)
    };
    let mismatch = |sd: f64| {
        let p = predicted_t2_star(sd, sigma_b, t2_hom);
        (p[0] - targets[0]) / targets[0] + (p[2] - targets[2]) / targets[2]
    };
    let sigma_d = if mismatch(0.0) <= 0.0 { 0.0 } else { bisect_decreasing(mismatch, 0.0, 1e4) };
    Ok(Calibration { sigma_d, sigma_b, predicted: predicted_t2_star(sigma_d, sigma_b, t2_hom) })
}
