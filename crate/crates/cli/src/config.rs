// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one TOML document holding the simulation model, the
//! experiment to dispatch and the output settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use odmr_core::config::{DecoherenceSettings, PumpSettings, RabiSettings, SpectrumSettings};
use odmr_core::engine::{InhomogeneityModel, ReadoutModel};
use odmr_core::experiments::{PrepId, ReadoutScheme};
use odmr_core::{RelaxationRates, SimConfig, SpinParameters};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Either explicit values or an inclusive `start..=stop` range in `step`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Self::Range(RangeSpec { start, stop, step })
    }

    pub fn points(&self, name: &str) -> anyhow::Result<Vec<f64>> {
        match self {
            Self::Values(v) => {
                if v.is_empty() {
                    bail!("config: grid `{name}` is empty");
                }
                Ok(v.clone())
            }
            Self::Range(RangeSpec { start, stop, step }) => {
                if !(step.is_finite() && *step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                    bail!("config: grid `{name}` needs finite start <= stop and step > 0");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 10_000_000 {
                    bail!("config: grid `{name}` has more than 10^7 points");
                }
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

fn all_readouts() -> Vec<ReadoutScheme> {
    ReadoutScheme::ALL.to_vec()
}

/// Experiment dispatched by `simulate`. Pulse-length grids are in ns for
/// `rabi` and `fid`, µs otherwise; spectra are swept in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Rabi {
        transition: u8,
        /// RF power, W.
        power: f64,
        tau: Grid,
        #[serde(default)]
        noise: f64,
    },
    Fid {
        transition: u8,
        /// MHz.
        detuning: f64,
        tau: Grid,
        #[serde(default)]
        noise: f64,
    },
    Echo {
        transition: u8,
        tau: Grid,
        #[serde(default)]
        noise: f64,
    },
    T1Gamma {
        readout: ReadoutScheme,
        tau: Grid,
        #[serde(default)]
        noise: f64,
    },
    T1Alpha {
        tau: Grid,
        #[serde(default)]
        noise: f64,
    },
    Pump {
        prep: PrepId,
        t: Grid,
        #[serde(default = "all_readouts")]
        readouts: Vec<ReadoutScheme>,
        #[serde(default)]
        noise: f64,
    },
    Cw {
        f: Grid,
    },
    DoubleResonance {
        pump_at: f64,
        f: Grid,
    },
    /// A pulse-sequence file run once per ensemble; emits the single signal.
    Sequence {
        path: PathBuf,
    },
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Rabi { .. } => "rabi",
            Self::Fid { .. } => "fid",
            Self::Echo { .. } => "echo",
            Self::T1Gamma { .. } => "t1_gamma",
            Self::T1Alpha { .. } => "t1_alpha",
            Self::Pump { .. } => "pump",
            Self::Cw { .. } => "cw",
            Self::DoubleResonance { .. } => "double_resonance",
            Self::Sequence { .. } => "sequence",
        }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        Self::Rabi { transition: 1, power: 20.0, tau: Grid::range(0.0, 1000.0, 2.5), noise: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelsOptions {
    /// Field magnitudes, mT, along the configured field direction.
    pub b_values: Grid,
}

impl Default for LevelsOptions {
    fn default() -> Self {
        Self { b_values: Grid::range(0.0, 5.0, 0.05) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraOptions {
    /// MHz.
    pub f: Grid,
    /// Frequency of the fixed second source, MHz; cw spectrum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_at: Option<f64>,
}

impl Default for SpectraOptions {
    fn default() -> Self {
        Self { f: Grid::range(40.0, 160.0, 0.1), pump_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Dark delays of the relaxation scans, µs.
    pub t1_tau: Grid,
    /// Laser durations of the pumping scans, µs.
    pub pump_t: Grid,
    /// W/cm².
    pub intensities: Vec<f64>,
    /// Gaussian noise on every curve, in units of the readout contrast.
    pub noise: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            t1_tau: Grid::range(0.0, 800.0, 10.0),
            pump_t: Grid::range(0.0, 200.0, 1.0),
            intensities: vec![100.0, 250.0, 400.0, 622.64, 800.0],
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spin: SpinParameters,
    pub rates: RelaxationRates,
    pub pump: PumpSettings,
    pub decoherence: DecoherenceSettings,
    pub inhomogeneity: InhomogeneityModel,
    pub readout: ReadoutModel,
    pub rabi: RabiSettings,
    pub spectrum: SpectrumSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
    pub experiment: Experiment,
    pub levels: LevelsOptions,
    pub spectra: SpectraOptions,
    pub pipeline: PipelineOptions,
    /// Seeds the ensemble draws and the measurement noise.
    pub seed: u64,
    /// Output path prefix; file names are appended to it.
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            spin: sim.spin,
            rates: sim.rates,
            pump: sim.pump,
            decoherence: sim.decoherence,
            inhomogeneity: sim.inhomogeneity,
            readout: sim.readout,
            rabi: sim.rabi,
            spectrum: sim.spectrum,
            normalization: sim.normalization,
            experiment: Experiment::default(),
            levels: LevelsOptions::default(),
            spectra: SpectraOptions::default(),
            pipeline: PipelineOptions::default(),
            seed: sim.inhomogeneity.seed,
            output: PathBuf::from("odmr-out/run"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("config: {}", e.to_string().trim_end()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Simulation model with the run seed applied to the ensemble.
    pub fn sim(&self) -> SimConfig {
        let mut inhomogeneity = self.inhomogeneity;
        inhomogeneity.seed = self.seed;
        SimConfig {
            spin: self.spin,
            rates: self.rates,
            pump: self.pump,
            decoherence: self.decoherence,
            inhomogeneity,
            readout: self.readout,
            rabi: self.rabi,
            spectrum: self.spectrum,
            normalization: self.normalization,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.sim().validate()?;
        if !self.pipeline.noise.is_finite() || self.pipeline.noise < 0.0 {
            bail!("config: pipeline.noise must be finite and >= 0");
        }
        if self.pipeline.intensities.len() < 3 || self.pipeline.intensities.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            bail!("config: pipeline.intensities needs at least 3 values > 0");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
