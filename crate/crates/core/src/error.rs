// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the simulation and fitting routines.
///
/// Every variant names the module that produced it so CLI diagnostics can be
/// traced back without a backtrace.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{module}: invalid parameter `{param}`: {reason}")]
    InvalidParameter {
        module: &'static str,
        param: &'static str,
        reason: String,
    },

    #[error("rate-dynamics: closed-form decomposition is singular ({0}); use the numerical propagator")]
    SingularDecomposition(&'static str),

    #[error("rate-dynamics: generator is not conservative (largest column sum {0:e})")]
    NonConservative(f64),

    #[error("coherent-engine: pulse sequence `{0}` has no readout event")]
    MissingReadout(&'static str),

    #[error("coherent-engine: pulse sequence `{0}` has a readout that is not the final event")]
    ReadoutNotTerminal(&'static str),

    #[error("experiments: {0}")]
    Experiment(String),

    #[error("fitting: singular normal equations (condition number {condition:e})")]
    SingularNormalEquations { condition: f64 },

    #[error("fitting: parameter `{param}` = {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds {
        param: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("fitting: dataset has {points} points but model `{model}` needs at least {needed}")]
    TooFewPoints {
        model: &'static str,
        points: usize,
        needed: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(module: &'static str, param: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        module,
        param,
        reason: reason.into(),
    }
}
