// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and fitting toolkit for optically detected magnetic resonance
//! of spin-3/2 color centers.
//!
//! - [`spin`]: ground-state Hamiltonian, levels and transition frequencies
//! - [`rates`]: relaxation and optical-pumping population dynamics
//! - [`engine`]: density-matrix pulse-sequence simulator with ensemble averaging
//! - [`experiments`]: canned Rabi, FID, echo, T1, pumping and cw protocols
//! - [`fitting`]: damped least squares and the model library

pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fitting;
pub mod rates;
pub mod spin;

pub use config::SimConfig;
pub use engine::{DensityState, PulseEvent, PulseSequence};
pub use error::{Error, Result};
pub use experiments::Curve;
pub use fitting::{fit, FitModel, FitResult};
pub use rates::{PopulationVector, PumpRate, RelaxationRates};
pub use spin::{SpinParameters, TransitionFrequencies};
