// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Density-matrix pulse engine with inhomogeneous ensemble averaging.

mod ensemble;
mod sequence;
mod state;

pub use ensemble::{
    calibrate_inhomogeneity, detuning_shifts, draw_samples, ensemble_statistics, gaussian_envelope_time,
    predicted_t2_star, ramsey_events, ramsey_signal, Calibration, InhomogeneityModel, DEFAULT_SIGMA_B,
    DEFAULT_SIGMA_D, MEASURED_T2_STAR,
};
pub use sequence::{run_sequence, run_single, EngineConfig, PulseEvent, PulseSequence};
pub use state::{
    apply_driven_rotation, apply_rotation, free_evolve, laser_evolve, readout_signal, DecoherenceParams,
    DensityState, ReadoutModel, LASER_QUENCH_US,
};
