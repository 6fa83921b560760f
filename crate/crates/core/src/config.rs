// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation settings shared by the experiments and the CLI.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{DecoherenceParams, EngineConfig, InhomogeneityModel, ReadoutModel};
use crate::error::{invalid, Result};
use crate::rates::{self, PumpRate, RelaxationRates};
use crate::spin::{transition_dipole_weights, SpinParameters};

/// Rabi frequencies measured at 20 W, MHz.
pub const TABLE_RABI_FREQUENCIES: [f64; 3] = [5.26, 6.14, 4.29];
/// Rabi decay times measured at 20 W, ns.
pub const TABLE_RABI_T2: [f64; 3] = [299.0, 285.0, 381.0];
/// Fitted f_R/√P coefficients from the power series, MHz/√W.
pub const POWER_SERIES_R: [f64; 3] = [1.168, 1.352, 1.006];
/// Linear 1/T2R(f_R) coefficients: slope (dimensionless) and offset (µs⁻¹).
pub const POWER_SERIES_M: [f64; 3] = [0.35, 0.53, 0.22];
pub const POWER_SERIES_C: [f64; 3] = [1.45, 0.07, 1.62];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSettings {
    /// δ per unit intensity, ms⁻¹/(W/cm²).
    pub slope: f64,
    /// W/cm².
    pub intensity: f64,
    /// Polarizing laser pulse, µs.
    pub prep_duration: f64,
    /// Readout laser pulse, µs.
    pub readout_duration: f64,
}

impl Default for PumpSettings {
    fn default() -> Self {
        Self { slope: rates::DEFAULT_PUMP_SLOPE, intensity: 622.64, prep_duration: 300.0, readout_duration: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceSettings {
    /// µs.
    pub t2_hom: [f64; 3],
}

impl Default for DecoherenceSettings {
    fn default() -> Self {
        Self { t2_hom: [7.9, 6.2, 8.2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiMode {
    /// f_R = r_i·√P with per-transition `r`.
    Calibrated,
    /// f_R = r0·w_i·√P with w the spin-3/2 dipole weights normalized to ν2.
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RabiDecay {
    /// Power-independent T2R per transition, ns.
    Fixed { values_ns: [f64; 3] },
    /// 1/T2R = m·f_R + c with f_R in MHz and 1/T2R in µs⁻¹.
    Linear { m: [f64; 3], c: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiSettings {
    pub mode: RabiMode,
    /// MHz/√W.
    pub r: [f64; 3],
    /// MHz/√W, transition-2 coefficient in ideal mode.
    pub r0: f64,
    pub decay: RabiDecay,
}

impl Default for RabiSettings {
    fn default() -> Self {
        let root20 = 20f64.sqrt();
        Self {
            mode: RabiMode::Calibrated,
            r: TABLE_RABI_FREQUENCIES.map(|f| f / root20),
            r0: POWER_SERIES_R[1],
            decay: RabiDecay::Fixed { values_ns: TABLE_RABI_T2 },
        }
    }
}

impl RabiSettings {
    /// Settings built from the power-series fit coefficients.
    pub fn power_series() -> Self {
        Self {
            mode: RabiMode::Calibrated,
            r: POWER_SERIES_R,
            r0: POWER_SERIES_R[1],
            decay: RabiDecay::Linear { m: POWER_SERIES_M, c: POWER_SERIES_C },
        }
    }

    /// Rabi frequency (MHz) of `transition` at RF power `power` (W).
    pub fn frequency(&self, transition: u8, power: f64) -> Result<f64> {
        let k = index(transition)?;
        if !(power >= 0.0 && power.is_finite()) {
            return Err(invalid("experiments", "rf_power", format!("must be >= 0, got {power}")));
        }
        let coeff = match self.mode {
            RabiMode::Calibrated => self.r[k],
            RabiMode::Ideal => {
                let w = transition_dipole_weights();
                self.r0 * w[k] / w[1]
            }
        };
        Ok(coeff * power.sqrt())
    }

    /// Rabi decay time (µs) at Rabi frequency `f_r` (MHz).
    pub fn decay_time(&self, transition: u8, f_r: f64) -> Result<f64> {
        let k = index(transition)?;
        let t = match self.decay {
            RabiDecay::Fixed { values_ns } => values_ns[k] * 1e-3,
            RabiDecay::Linear { m, c } => 1.0 / (m[k] * f_r + c[k]),
        };
        if !(t > 0.0) || t.is_nan() {
            return Err(invalid("experiments", "rabi.decay", format!("non-positive T2R for transition {transition}")));
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || !(self.r0 >= 0.0 && self.r0.is_finite()) {
            return Err(invalid("config", "rabi.r", "coefficients must be finite and >= 0"));
        }
        match self.decay {
            RabiDecay::Fixed { values_ns } if values_ns.iter().any(|v| !(*v > 0.0)) => {
                Err(invalid("config", "rabi.decay.values_ns", "must be > 0"))
            }
            RabiDecay::Linear { m, c } if m.iter().chain(c.iter()).any(|v| !v.is_finite()) => {
                Err(invalid("config", "rabi.decay", "coefficients must be finite"))
            }
            _ => Ok(()),
        }
    }
}

fn index(transition: u8) -> Result<usize> {
    match transition {
        1..=3 => Ok(transition as usize - 1),
        _ => Err(invalid("experiments", "transition", format!("must be 1, 2 or 3, got {transition}"))),
    }
}

/// Rate-level RF model for the cw spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    /// Peak mixing rate of the swept source, ms⁻¹.
    pub rf_saturation: f64,
    /// Lorentzian full width at half maximum, MHz.
    pub linewidth: f64,
    /// Peak mixing rate of the fixed pump source, ms⁻¹.
    pub pump_saturation: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self { rf_saturation: 20.0, linewidth: 2.0, pump_saturation: 200.0 }
    }
}

impl SpectrumSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth > 0.0 && self.linewidth.is_finite()) {
            return Err(invalid("experiments", "linewidth", format!("must be > 0, got {}", self.linewidth)));
        }
        for (name, v) in [("rf_saturation", self.rf_saturation), ("pump_saturation", self.pump_saturation)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("experiments", name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Complete simulation configuration. Every section falls back to the
/// reference values when omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub spin: SpinParameters,
    pub rates: RelaxationRates,
    pub pump: PumpSettings,
    pub decoherence: DecoherenceSettings,
    pub inhomogeneity: InhomogeneityModel,
    pub readout: ReadoutModel,
    pub rabi: RabiSettings,
    pub spectrum: SpectrumSettings,
    /// Value the stationary ρ33 − ρ44 is scaled to when turning readout
    /// differences into populations. Uses the model's own value when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.engine().validate()?;
        let p = &self.pump;
        for (name, v) in [
            ("pump.intensity", p.intensity),
            ("pump.prep_duration", p.prep_duration),
            ("pump.readout_duration", p.readout_duration),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("config", name, format!("must be finite and >= 0, got {v}")));
            }
        }
        self.rabi.validate()?;
        self.spectrum.validate()?;
        if let Some(n) = self.normalization {
            if !(n > 0.0 && n.is_finite()) {
                return Err(invalid("config", "normalization", format!("must be > 0, got {n}")));
            }
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            spin: self.spin,
            decoherence: DecoherenceParams { t2_hom: self.decoherence.t2_hom, t1_model: self.rates },
            readout: self.readout,
            inhomogeneity: self.inhomogeneity,
            pump_slope: self.pump.slope,
        }
    }

    /// Pump rate at the configured intensity.
    pub fn delta(&self) -> Result<PumpRate> {
        rates::intensity_to_delta(self.pump.intensity, self.pump.slope)
    }

    /// (duration, intensity) of the polarizing laser pulse.
    pub fn prep_laser(&self) -> (f64, f64) {
        (self.pump.prep_duration, self.pump.intensity)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// The same settings with the inhomogeneous spread switched off,
    /// handy for population-only protocols.
    pub fn without_ensemble(mut self) -> Self {
        self.inhomogeneity.sigma_d = 0.0;
        self.inhomogeneity.sigma_b = 0.0;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn default_rabi_reproduces_reference_frequencies() {
        let r = RabiSettings::default();
        for t in 1..=3u8 {
            let f = r.frequency(t, 20.0).unwrap();
            assert!((f - TABLE_RABI_FREQUENCIES[t as usize - 1]).abs() < 1e-12);
            let t2 = r.decay_time(t, f).unwrap();
            assert!((t2 - TABLE_RABI_T2[t as usize - 1] * 1e-3).abs() < 1e-15);
        }
        assert_eq!(r.frequency(1, 0.0).unwrap(), 0.0);
        assert!(r.frequency(4, 1.0).is_err());
    }

    #[test]
    fn ideal_mode_ratios() {
        let r = RabiSettings { mode: RabiMode::Ideal, ..RabiSettings::default() };
        let f: Vec<f64> = (1..=3).map(|t| r.frequency(t, 20.0).unwrap()).collect();
        let s3 = 3f64.sqrt();
        assert!((f[0] / f[1] - s3 / 2.0).abs() < 1e-12);
        assert!((f[2] / f[1] - s3 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_series_decay_near_reference() {
        let r = RabiSettings::power_series();
        let f = r.frequency(1, 20.0).unwrap();
        let t2 = r.decay_time(1, f).unwrap();
        assert!((t2 - 0.299).abs() < 0.02, "{t2}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = SimConfig::default();
        let mut b = a;
        b.rates.gamma = 6.9;
        assert_eq!(a.hash(), SimConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<SimConfig>(r#"{"rates":{"alpha":1.0,"gamma":2.0,"beta":3.0}}"#);
        assert!(err.is_err());
        let ok: SimConfig = serde_json::from_str(r#"{"rates":{"alpha":1.0,"gamma":2.0}}"#).unwrap();
        assert_eq!(ok.rates.alpha, 1.0);
        assert_eq!(ok.pump, PumpSettings::default());
    }

    #[test]
    fn delta_at_reference_intensity() {
        let d = SimConfig::default().delta().unwrap();
        assert!((d.0 - 37.3584).abs() < 1e-9);
    }
}
