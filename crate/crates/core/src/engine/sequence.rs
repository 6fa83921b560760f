// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{detuning_shifts, draw_samples, InhomogeneityModel};
use super::state::{self, DecoherenceParams, DensityState, ReadoutModel};
use crate::error::{invalid, Error, Result};
use crate::rates;
use crate::spin::{self, SpinParameters};

/// Coherences below this norm are treated as absent when deciding whether
/// a sequence needs the inhomogeneous ensemble.
const COHERENCE_FLOOR: f64 = 1e-14;

/// One step of a pulse sequence. Durations in µs, intensity in W/cm²,
/// angles in rad, frequencies in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseEvent {
    Laser {
        duration: f64,
        intensity: f64,
    },
    Rf {
        transition: u8,
        flip_angle: f64,
        #[serde(default)]
        phase: f64,
        /// Drive frequency; sets the rotating frame of the addressed
        /// transition until the next pulse on it. Resonant when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drive_frequency: Option<f64>,
        /// Pulse length. Only used together with `rabi_t2`.
        #[serde(default)]
        duration: f64,
        /// Decay time of the driven two-level Bloch vector.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rabi_t2: Option<f64>,
    },
    Delay {
        duration: f64,
    },
    Readout {
        duration: f64,
    },
}

impl PulseEvent {
    /// Ideal instantaneous rotation, resonant drive.
    pub fn rf(transition: u8, flip_angle: f64, phase: f64) -> Self {
        Self::Rf { transition, flip_angle, phase, drive_frequency: None, duration: 0.0, rabi_t2: None }
    }

    pub fn pi(transition: u8) -> Self {
        Self::rf(transition, std::f64::consts::PI, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |param, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid("coherent-engine", param, format!("must be finite and >= 0, got {v}")))
            }
        };
        match *self {
            Self::Laser { duration, intensity } => {
                check("duration", duration)?;
                check("intensity", intensity)
            }
            Self::Rf { transition, flip_angle, phase, drive_frequency, duration, rabi_t2 } => {
                if !(1..=3).contains(&transition) {
                    return Err(invalid("coherent-engine", "transition", format!("must be 1, 2 or 3, got {transition}")));
                }
                if !flip_angle.is_finite() || !phase.is_finite() {
                    return Err(invalid("coherent-engine", "flip_angle", "angles must be finite"));
                }
                if drive_frequency.is_some_and(|f| !f.is_finite()) {
                    return Err(invalid("coherent-engine", "drive_frequency", "must be finite"));
                }
                check("duration", duration)?;
                if let Some(t2) = rabi_t2 {
                    if !(t2 > 0.0) {
                        return Err(invalid("coherent-engine", "rabi_t2", format!("must be > 0, got {t2}")));
                    }
                }
                Ok(())
            }
            Self::Delay { duration } | Self::Readout { duration } => check("duration", duration),
        }
    }
}

/// A main event list and an optional reference list whose readout is subtracted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub events: Vec<PulseEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_events: Option<Vec<PulseEvent>>,
}

impl PulseSequence {
    pub fn new(events: Vec<PulseEvent>) -> Self {
        Self { events, reference_events: None }
    }

    pub fn with_reference(events: Vec<PulseEvent>, reference: Vec<PulseEvent>) -> Self {
        Self { events, reference_events: Some(reference) }
    }

    pub fn validate(&self) -> Result<()> {
        check_list(&self.events, "main")?;
        if let Some(r) = &self.reference_events {
            check_list(r, "reference")?;
        }
        Ok(())
    }
}

fn check_list(events: &[PulseEvent], name: &'static str) -> Result<()> {
    for e in events {
        e.validate()?;
    }
    let readouts = events.iter().filter(|e| matches!(e, PulseEvent::Readout { .. })).count();
    match (readouts, events.last()) {
        (0, _) => Err(Error::MissingReadout(name)),
        (1, Some(PulseEvent::Readout { .. })) => Ok(()),
        _ => Err(Error::ReadoutNotTerminal(name)),
    }
}

/// Everything the engine needs to execute a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub spin: SpinParameters,
    pub decoherence: DecoherenceParams,
    pub readout: ReadoutModel,
    pub inhomogeneity: InhomogeneityModel,
    /// ms⁻¹ per W/cm².
    pub pump_slope: f64,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.spin.validate()?;
        self.decoherence.validate()?;
        self.readout.validate()?;
        self.inhomogeneity.validate()?;
        rates::intensity_to_delta(1.0, self.pump_slope).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy)]
struct Cursor {
    state: DensityState,
    /// Per-transition offset of the nominal frequency from the drive frame, MHz.
    frames: [f64; 3],
}

struct Runner<'a> {
    cfg: &'a EngineConfig,
    nominal: [f64; 3],
}

impl Runner<'_> {
    fn step(&self, cur: Cursor, ev: &PulseEvent, shifts: [f64; 3]) -> Result<Cursor> {
        let dec = &self.cfg.decoherence;
        let state = match *ev {
            PulseEvent::Laser { duration, intensity } => {
                let delta = rates::intensity_to_delta(intensity, self.cfg.pump_slope)?;
                state::laser_evolve(&cur.state, duration, delta, dec)?
            }
            PulseEvent::Rf { transition, flip_angle, phase, drive_frequency, duration, rabi_t2 } => {
                let mut frames = cur.frames;
                if let Some(f) = drive_frequency {
                    frames[transition as usize - 1] = self.nominal[transition as usize - 1] - f;
                }
                let state = match rabi_t2 {
                    Some(t2) => state::apply_driven_rotation(&cur.state, transition, flip_angle, phase, (-duration / t2).exp())?,
                    None => state::apply_rotation(&cur.state, transition, flip_angle, phase)?,
                };
                return Ok(Cursor { state, frames });
            }
            PulseEvent::Delay { duration } => {
                let offsets = [0, 1, 2].map(|k| cur.frames[k] + shifts[k]);
                state::free_evolve(&cur.state, duration, offsets, dec)?
            }
            PulseEvent::Readout { .. } => cur.state,
        };
        Ok(Cursor { state, frames: cur.frames })
    }

    /// Runs the sample-independent head of `events` once. Stops before the
    /// first delay that carries coherence, since only free precession sees
    /// the per-sample detuning.
    fn prepare<'e>(&self, events: &'e [PulseEvent]) -> Result<(Cursor, &'e [PulseEvent])> {
        let mut cur = Cursor { state: DensityState::unpolarized(), frames: [0.0; 3] };
        for (i, ev) in events.iter().enumerate() {
            if matches!(ev, PulseEvent::Delay { .. }) && cur.state.coherence_norm() > COHERENCE_FLOOR {
                return Ok((cur, &events[i..]));
            }
            cur = self.step(cur, ev, [0.0; 3])?;
        }
        Ok((cur, &[]))
    }

    fn finish(&self, mut cur: Cursor, rest: &[PulseEvent], shifts: [f64; 3]) -> Result<f64> {
        for ev in rest {
            cur = self.step(cur, ev, shifts)?;
        }
        state::readout_signal(&cur.state, &self.cfg.readout)
    }

    fn average(&self, events: &[PulseEvent], draws: &[(f64, f64)]) -> Result<f64> {
        let (head, rest) = self.prepare(events)?;
        if rest.is_empty() || draws.is_empty() {
            return self.finish(head, rest, [0.0; 3]);
        }
        let values: Vec<f64> = draws
            .par_iter()
            .map(|&(dd, db)| self.finish(head, rest, detuning_shifts(dd, db)))
            .collect::<Result<_>>()?;
        // Fixed-order reduction keeps the result independent of the thread count.
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Ensemble-averaged readout of the main list minus that of the reference
/// list (or the bare main readout when there is no reference).
pub fn run_sequence(seq: &PulseSequence, cfg: &EngineConfig) -> Result<f64> {
    seq.validate()?;
    cfg.validate()?;
    let runner = Runner { cfg, nominal: spin::transition_frequencies(&cfg.spin).as_array() };
    let draws = if cfg.inhomogeneity.is_trivial() { Vec::new() } else { draw_samples(&cfg.inhomogeneity) };
    let main = runner.average(&seq.events, &draws)?;
    match &seq.reference_events {
        Some(r) => Ok(main - runner.average(r, &draws)?),
        None => Ok(main),
    }
}

/// Runs `events` on a single ensemble member with explicit detuning shifts
/// and returns the final state.
pub fn run_single(events: &[PulseEvent], shifts: [f64; 3], cfg: &EngineConfig) -> Result<DensityState> {
    for e in events {
        e.validate()?;
    }
    let runner = Runner { cfg, nominal: spin::transition_frequencies(&cfg.spin).as_array() };
    let mut cur = Cursor { state: DensityState::unpolarized(), frames: [0.0; 3] };
    for ev in events {
        cur = runner.step(cur, ev, shifts)?;
    }
    Ok(cur.state)
}
