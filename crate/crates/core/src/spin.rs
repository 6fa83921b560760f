// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Spin-3/2 ground-state Hamiltonian with axial zero-field splitting and
//! Zeeman coupling.
//!
//! Basis order everywhere is m = +3/2, +1/2, -1/2, -3/2. Frequencies are in
//! MHz and fields in mT.

use nalgebra::{Complex, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type C64 = Complex<f64>;
pub type CMatrix4 = Matrix4<C64>;

/// Bohr magneton over Planck's constant, MHz/mT (CODATA 13.996246 GHz/T).
pub const BOHR_MHZ_PER_MT: f64 = 13.996246;

/// Magnetic quantum numbers in basis order.
pub const M_VALUES: [f64; 4] = [1.5, 0.5, -0.5, -1.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinParameters {
    /// Zero-field splitting D in MHz; the |±3/2>-|±1/2> gap at zero field is |2D|.
    pub d_half: f64,
    pub g_factor: f64,
    /// Lab-frame field in mT, z along the crystal c-axis.
    pub b_field: [f64; 3],
}

impl Default for SpinParameters {
    fn default() -> Self {
        Self {
            d_half: -14.0,
            g_factor: 2.0,
            b_field: [0.0, 0.0, 3.7],
        }
    }
}

impl SpinParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_factor > 0.0 && self.g_factor.is_finite()) {
            return Err(invalid("spin-core", "g_factor", format!("must be > 0, got {}", self.g_factor)));
        }
        if !self.d_half.is_finite() {
            return Err(invalid("spin-core", "d_half", "must be finite"));
        }
        if self.b_field.iter().any(|b| !b.is_finite()) {
            return Err(invalid("spin-core", "b_field", "components must be finite"));
        }
        Ok(())
    }

    /// Zeeman frequency g·(μB/h)·|B| in MHz.
    pub fn larmor(&self) -> f64 {
        self.g_factor * BOHR_MHZ_PER_MT * Vector3::from(self.b_field).norm()
    }

    fn is_axial(&self) -> bool {
        self.b_field[0] == 0.0 && self.b_field[1] == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevels {
    /// MHz, ordered by m = +3/2, +1/2, -1/2, -3/2 (by <Sz> for off-axis fields).
    pub energies: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionFrequencies {
    /// |+3/2> <-> |+1/2>
    pub nu1: f64,
    /// |+1/2> <-> |-1/2>
    pub nu2: f64,
    /// |-1/2> <-> |-3/2>
    pub nu3: f64,
}

impl TransitionFrequencies {
    pub fn as_array(&self) -> [f64; 3] {
        [self.nu1, self.nu2, self.nu3]
    }

    fn from_levels(levels: &EnergyLevels) -> Self {
        let e = levels.energies;
        Self {
            nu1: (e[0] - e[1]).abs(),
            nu2: (e[1] - e[2]).abs(),
            nu3: (e[2] - e[3]).abs(),
        }
    }
}

pub struct SpinOperators {
    pub x: CMatrix4,
    pub y: CMatrix4,
    pub z: CMatrix4,
}

/// Spin-3/2 angular momentum matrices.
pub fn spin_operators() -> SpinOperators {
    let zero = C64::new(0.0, 0.0);
    let mut plus = CMatrix4::from_element(zero);
    // <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    for col in 1..4 {
        let m = M_VALUES[col];
        plus[(col - 1, col)] = C64::new((3.75 - m * (m + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    let x = (plus + minus) * C64::new(0.5, 0.0);
    let y = (plus - minus) * C64::new(0.0, -0.5);
    let z = CMatrix4::from_diagonal(&nalgebra::Vector4::from(M_VALUES.map(|m| C64::new(m, 0.0))));
    SpinOperators { x, y, z }
}

/// H = D(Sz² − 5/4) + g(μB/h) B·S, in MHz.
pub fn hamiltonian(p: &SpinParameters) -> CMatrix4 {
    let s = spin_operators();
    let ident = CMatrix4::identity();
    let zfs = (s.z * s.z - ident * C64::new(1.25, 0.0)) * C64::new(p.d_half, 0.0);
    let gamma = p.g_factor * BOHR_MHZ_PER_MT;
    let [bx, by, bz] = p.b_field;
    zfs + s.x * C64::new(gamma * bx, 0.0) + s.y * C64::new(gamma * by, 0.0) + s.z * C64::new(gamma * bz, 0.0)
}

/// Energy levels; closed form for axial fields, Hermitian diagonalization otherwise.
pub fn energy_levels(p: &SpinParameters) -> EnergyLevels {
    if p.is_axial() {
        let nu0 = p.g_factor * BOHR_MHZ_PER_MT * p.b_field[2];
        return EnergyLevels {
            energies: M_VALUES.map(|m| p.d_half * (m * m - 1.25) + nu0 * m),
        };
    }
    let eig = hamiltonian(p).symmetric_eigen();
    let sz = spin_operators().z;
    let mut states: Vec<(f64, f64)> = (0..4)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            let mz = (v.adjoint() * sz * v)[(0, 0)].re;
            (mz, eig.eigenvalues[k])
        })
        .collect();
    states.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut energies = [0.0; 4];
    for (slot, (_, e)) in energies.iter_mut().zip(states) {
        *slot = e;
    }
    EnergyLevels { energies }
}

pub fn transition_frequencies(p: &SpinParameters) -> TransitionFrequencies {
    TransitionFrequencies::from_levels(&energy_levels(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub b_mt: f64,
    pub levels: EnergyLevels,
    pub transitions: TransitionFrequencies,
}

/// Levels and transitions for each field magnitude, along the direction of
/// `p.b_field` (the c-axis when `p.b_field` is zero).
pub fn field_sweep(p: &SpinParameters, b_values: &[f64]) -> Result<Vec<LevelRow>> {
    p.validate()?;
    if b_values.iter().any(|b| !b.is_finite()) {
        return Err(invalid("spin-core", "b_values", "field values must be finite"));
    }
    let dir = Vector3::from(p.b_field);
    let unit = if dir.norm() > 0.0 { dir / dir.norm() } else { Vector3::z() };
    Ok(b_values
        .iter()
        .map(|&b| {
            let mut q = *p;
            q.b_field = [unit.x * b, unit.y * b, unit.z * b];
            let levels = energy_levels(&q);
            LevelRow {
                b_mt: b,
                levels,
                transitions: TransitionFrequencies::from_levels(&levels),
            }
        })
        .collect())
}

/// Relative RF matrix elements |<m|Sx|m-1>| scaled so the middle transition
/// is 2, giving √3 : 2 : √3.
pub fn transition_dipole_weights() -> [f64; 3] {
    let sx = spin_operators().x;
    let raw = [sx[(0, 1)].norm(), sx[(1, 2)].norm(), sx[(2, 3)].norm()];
    let scale = 2.0 / raw[1];
    raw.map(|r| r * scale)
}
