// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::engine::PulseEvent;
use crate::rates::PopulationVector;

/// Initial states reachable with the polarizing laser and π pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepId {
    Unpolarized,
    Rho1,
    Rho2,
    Rho3,
    Rho4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepState {
    pub id: PrepId,
    /// Ideal state reached in the strong-pumping limit.
    pub target: PopulationVector,
    pub events: Vec<PulseEvent>,
}

impl PrepId {
    pub const ALL: [PrepId; 5] = [Self::Unpolarized, Self::Rho1, Self::Rho2, Self::Rho3, Self::Rho4];

    pub fn target(self) -> PopulationVector {
        PopulationVector(match self {
            Self::Unpolarized => [0.25; 4],
            Self::Rho1 => [0.0, 0.5, 0.5, 0.0],
            Self::Rho2 => [0.5, 0.5, 0.0, 0.0],
            Self::Rho3 => [0.0, 0.5, 0.0, 0.5],
            Self::Rho4 => [0.0, 0.0, 0.5, 0.5],
        })
    }

    /// π pulses applied after the polarizing laser.
    pub fn pulses(self) -> &'static [u8] {
        match self {
            Self::Unpolarized | Self::Rho1 => &[],
            Self::Rho2 => &[1, 2],
            Self::Rho3 => &[3],
            Self::Rho4 => &[3, 2],
        }
    }

    /// Event list for a polarizing pulse of `laser = (duration µs, intensity W/cm²)`.
    /// The unpolarized state needs no events.
    pub fn prep(self, laser: (f64, f64)) -> PrepState {
        let mut events = Vec::new();
        if self != Self::Unpolarized {
            events.push(PulseEvent::Laser { duration: laser.0, intensity: laser.1 });
            events.extend(self.pulses().iter().map(|&t| PulseEvent::pi(t)));
        }
        PrepState { id: self, target: self.target(), events }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Unpolarized => "unpolarized",
            Self::Rho1 => "rho1",
            Self::Rho2 => "rho2",
            Self::Rho3 => "rho3",
            Self::Rho4 => "rho4",
        }
    }
}

/// π-pulse readouts converting a population difference into PL contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutScheme {
    D21,
    D34,
    D24,
    D31,
}

impl ReadoutScheme {
    pub const ALL: [ReadoutScheme; 4] = [Self::D21, Self::D34, Self::D24, Self::D31];

    /// Transitions pulsed before readout, in order.
    pub fn pulses(self) -> &'static [u8] {
        match self {
            Self::D21 => &[1],
            Self::D34 => &[3],
            Self::D24 => &[2, 3],
            Self::D31 => &[2, 1],
        }
    }

    pub fn events(self) -> Vec<PulseEvent> {
        self.pulses().iter().map(|&t| PulseEvent::pi(t)).collect()
    }

    /// Zero-based levels (a, b): the readout measures ρ_a − ρ_b.
    pub fn levels(self) -> (usize, usize) {
        match self {
            Self::D21 => (1, 0),
            Self::D34 => (2, 3),
            Self::D24 => (1, 3),
            Self::D31 => (2, 0),
        }
    }

    pub fn difference(self, rho: &PopulationVector) -> f64 {
        let (a, b) = self.levels();
        rho[a] - rho[b]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::D21 => "d21",
            Self::D34 => "d34",
            Self::D24 => "d24",
            Self::D31 => "d31",
        }
    }
}
