// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rates::{self, PopulationVector, RelaxationRates};
use crate::spin::{CMatrix4, C64};

/// Pulses shorter than this keep (decayed) coherences under illumination.
pub const LASER_QUENCH_US: f64 = 0.1;

/// 4×4 density matrix in the m = +3/2, +1/2, −1/2, −3/2 basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityState {
    rho: CMatrix4,
}

impl DensityState {
    pub fn from_populations(p: &PopulationVector) -> Self {
        let mut rho = CMatrix4::zeros();
        for k in 0..4 {
            rho[(k, k)] = C64::new(p[k], 0.0);
        }
        Self { rho }
    }

    pub fn unpolarized() -> Self {
        Self::from_populations(&PopulationVector::UNIFORM)
    }

    /// Wraps a matrix after checking unit trace, Hermiticity and positivity.
    pub fn from_matrix(rho: CMatrix4) -> Result<Self> {
        let s = Self { rho };
        if (s.trace() - 1.0).abs() > 1e-9 {
            return Err(invalid("coherent-engine", "rho", format!("trace must be 1, got {}", s.trace())));
        }
        if s.hermiticity_error() > 1e-12 {
            return Err(invalid("coherent-engine", "rho", "matrix must be Hermitian"));
        }
        if s.eigenvalues().iter().any(|&l| l < -1e-9) {
            return Err(invalid("coherent-engine", "rho", "matrix must be positive semidefinite"));
        }
        Ok(s)
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|k| self.rho[(k, k)].re).sum()
    }

    pub fn populations(&self) -> PopulationVector {
        PopulationVector::new_unchecked([0, 1, 2, 3].map(|k| self.rho[(k, k)].re))
    }

    pub fn coherence(&self, i: usize, j: usize) -> C64 {
        self.rho[(i, j)]
    }

    /// Frobenius norm of the off-diagonal part.
    pub fn coherence_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    acc += self.rho[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = self.rho.symmetric_eigen().eigenvalues;
        let mut out = [e[0], e[1], e[2], e[3]];
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.rho - other.rho).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn with_populations(mut self, p: &PopulationVector) -> Self {
        for k in 0..4 {
            self.rho[(k, k)] = C64::new(p[k], 0.0);
        }
        self
    }

    /// Multiplies each coherence ρ_ij (i < j) by `factor(i, j)` and ρ_ji by its conjugate.
    fn scale_coherences(mut self, factor: impl Fn(usize, usize) -> C64) -> Self {
        for i in 0..4 {
            for j in (i + 1)..4 {
                let f = factor(i, j);
                self.rho[(i, j)] *= f;
                self.rho[(j, i)] *= f.conj();
            }
        }
        self
    }
}

/// Per-transition homogeneous decoherence plus the population relaxation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    /// Homogeneous coherence decay time per transition, µs.
    pub t2_hom: [f64; 3],
    pub t1_model: RelaxationRates,
}

impl DecoherenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.t2_hom.iter().any(|t| !(*t > 0.0) || t.is_nan()) {
            return Err(invalid("coherent-engine", "t2_hom", format!("must be > 0, got {:?}", self.t2_hom)));
        }
        self.t1_model.validate()
    }

    /// Sum of 1/T2 over the transitions bridging levels i < j, µs⁻¹.
    fn bridge_rate(&self, i: usize, j: usize) -> f64 {
        (i..j).map(|k| 1.0 / self.t2_hom[k]).sum()
    }
}

/// PL readout: each ±3/2 level contributes S0 + Δ, each ±1/2 level S0 − Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutModel {
    pub s0: f64,
    pub delta_contrast: f64,
    /// Spin-polarized fraction of the ensemble.
    pub polarization: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self { s0: 1.0, delta_contrast: 0.05, polarization: 0.8 }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(invalid("coherent-engine", "s0", format!("must be > 0, got {}", self.s0)));
        }
        if !(self.delta_contrast.abs() < self.s0) {
            return Err(invalid(
                "coherent-engine",
                "delta_contrast",
                format!("|delta_contrast| must be below s0, got {}", self.delta_contrast),
            ));
        }
        if !(0.0..=1.0).contains(&self.polarization) {
            return Err(invalid("coherent-engine", "polarization", format!("must lie in [0, 1], got {}", self.polarization)));
        }
        Ok(())
    }
}

fn check_transition(transition: u8) -> Result<usize> {
    match transition {
        1..=3 => Ok(transition as usize - 1),
        _ => Err(invalid("coherent-engine", "transition", format!("must be 1, 2 or 3, got {transition}"))),
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid("coherent-engine", "duration", format!("must be >= 0, got {duration}")));
    }
    Ok(())
}

/// Ideal rotation exp(−i θ/2 (cos φ σx + sin φ σy)) on the two levels bridged
/// by `transition` (1, 2 or 3).
pub fn apply_rotation(s: &DensityState, transition: u8, flip_angle: f64, phase: f64) -> Result<DensityState> {
    let lo = check_transition(transition)?;
    let (c, sn) = ((flip_angle / 2.0).cos(), (flip_angle / 2.0).sin());
    let mut u = CMatrix4::identity();
    let minus_i_s = C64::new(0.0, -sn);
    u[(lo, lo)] = C64::new(c, 0.0);
    u[(lo + 1, lo + 1)] = C64::new(c, 0.0);
    u[(lo, lo + 1)] = minus_i_s * C64::from_polar(1.0, -phase);
    u[(lo + 1, lo)] = minus_i_s * C64::from_polar(1.0, phase);
    Ok(DensityState { rho: u * s.rho * u.adjoint() })
}

/// Rotation followed by isotropic decay of the addressed two-level Bloch
/// vector by `retained` (= e^{−τ/T2R} for a drive of length τ).
pub fn apply_driven_rotation(
    s: &DensityState,
    transition: u8,
    flip_angle: f64,
    phase: f64,
    retained: f64,
) -> Result<DensityState> {
    if !(0.0..=1.0).contains(&retained) {
        return Err(invalid("coherent-engine", "rabi_t2", "retained Bloch-vector fraction must lie in [0, 1]"));
    }
    let mut out = apply_rotation(s, transition, flip_angle, phase)?;
    let lo = transition as usize - 1;
    let hi = lo + 1;
    let mean = (out.rho[(lo, lo)] + out.rho[(hi, hi)]) * 0.5;
    out.rho[(lo, lo)] = mean + (out.rho[(lo, lo)] - mean) * retained;
    out.rho[(hi, hi)] = mean + (out.rho[(hi, hi)] - mean) * retained;
    out.rho[(lo, hi)] *= retained;
    out.rho[(hi, lo)] *= retained;
    Ok(out)
}

/// Free evolution for `duration` µs in the drive rotating frames.
///
/// `detuning_offsets[k]` (MHz) is the detuning of transition k+1 from its
/// drive frame. Populations relax under the T1 model; the coherence between
/// levels i < j picks up the summed phase and decay of the bridging transitions.
pub fn free_evolve(
    s: &DensityState,
    duration: f64,
    detuning_offsets: [f64; 3],
    dec: &DecoherenceParams,
) -> Result<DensityState> {
    check_duration(duration)?;
    if duration == 0.0 {
        return Ok(*s);
    }
    let pops = rates::relax_propagate(&s.populations(), duration, &dec.t1_model)?.populations;
    let out = s.with_populations(&pops).scale_coherences(|i, j| {
        let detuning: f64 = detuning_offsets[i..j].iter().sum();
        let decay = (-duration * dec.bridge_rate(i, j)).exp();
        C64::from_polar(decay, -2.0 * PI * detuning * duration)
    });
    Ok(out)
}

/// Illumination for `duration` µs at pump rate `delta` (ms⁻¹).
///
/// Populations follow the optical-pumping dynamics. Coherences are destroyed
/// for pulses longer than [`LASER_QUENCH_US`]; shorter pulses decay them at
/// δ plus the homogeneous rate.
pub fn laser_evolve(s: &DensityState, duration: f64, delta: rates::PumpRate, dec: &DecoherenceParams) -> Result<DensityState> {
    check_duration(duration)?;
    if duration == 0.0 {
        return Ok(*s);
    }
    let pops = rates::pump_propagate(&s.populations(), duration, &dec.t1_model, delta)?.populations;
    let quench = duration > LASER_QUENCH_US;
    let out = s.with_populations(&pops).scale_coherences(|i, j| {
        if quench {
            C64::new(0.0, 0.0)
        } else {
            C64::new((-duration * (delta.0 * 1e-3 + dec.bridge_rate(i, j))).exp(), 0.0)
        }
    });
    Ok(out)
}

/// S = 4·S0 + Δ(σ11 − σ22 − σ33 + σ44) with σ the polarization-embedded
/// populations. Populations are clamped to [0, 1] here and nowhere else.
pub fn readout_signal(s: &DensityState, m: &ReadoutModel) -> Result<f64> {
    let clamped = s.populations().as_array().map(|p| p.clamp(0.0, 1.0));
    let sigma = rates::subensemble_embed(&PopulationVector::new_unchecked(clamped), m.polarization)?.sigma;
    Ok(4.0 * m.s0 + m.delta_contrast * (sigma[0] - sigma[1] - sigma[2] + sigma[3]))
}
