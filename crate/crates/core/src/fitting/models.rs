// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ReadoutScheme;
use crate::rates::{self, PopulationVector, PumpRate, RelaxationRates};

/// Smallest value accepted for strictly positive parameters.
pub const POSITIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

const fn free(name: &'static str) -> ParamSpec {
    ParamSpec { name, lo: f64::NEG_INFINITY, hi: f64::INFINITY }
}

const fn positive(name: &'static str) -> ParamSpec {
    ParamSpec { name, lo: POSITIVE_FLOOR, hi: f64::INFINITY }
}

/// Model library. Units of x: ns for `rabi` and `fid`, µs for `echo_stretched`,
/// `t1_gamma`, `t1_alpha` and `pump_delta`, √W for `sqrt_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitModel {
    /// A + B·cos(2π f_R τ − φ)·e^{−τ/T2R}
    Rabi,
    /// A·cos(2π f τ + φ)·e^{−τ/T2*}
    Fid,
    /// A·e^{−(τ/T2)^n}
    EchoStretched,
    /// (A/2)·e^{−γτ}, γ in ms⁻¹
    T1Gamma,
    /// A·(ρ22 − ρ33)(τ) from the (½, ½, 0, 0) start. γ is held at the given
    /// value or fitted jointly when absent.
    T1Alpha {
        #[serde(default)]
        gamma: Option<f64>,
    },
    /// ρ_a − ρ_b under optical pumping from `rho0`; δ is fitted and the
    /// relaxation rates are either held or fitted.
    PumpDelta {
        rho0: PopulationVector,
        readout: ReadoutScheme,
        rates: RelaxationRates,
        #[serde(default)]
        free_rates: bool,
    },
    /// slope·x + intercept
    Linear,
    /// r·x with x = √P
    SqrtPower,
}

impl FitModel {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Rabi => "rabi",
            Self::Fid => "fid",
            Self::EchoStretched => "echo_stretched",
            Self::T1Gamma => "t1_gamma",
            Self::T1Alpha { .. } => "t1_alpha",
            Self::PumpDelta { .. } => "pump_delta",
            Self::Linear => "linear",
            Self::SqrtPower => "sqrt_power",
        }
    }

    pub fn params(&self) -> Vec<ParamSpec> {
        match self {
            Self::Rabi => vec![free("a"), free("b"), positive("f_r"), free("phi"), positive("t2r")],
            Self::Fid => vec![free("a"), positive("f_det"), free("phi"), positive("t2_star")],
            Self::EchoStretched => vec![free("a"), positive("t2"), ParamSpec { name: "n", lo: 0.5, hi: 4.0 }],
            Self::T1Gamma => vec![free("a"), positive("gamma")],
            Self::T1Alpha { gamma: Some(_) } => vec![free("a"), positive("alpha")],
            Self::T1Alpha { gamma: None } => vec![free("a"), positive("alpha"), positive("gamma")],
            Self::PumpDelta { free_rates: false, .. } => vec![positive("delta")],
            Self::PumpDelta { free_rates: true, .. } => vec![positive("delta"), positive("alpha"), positive("gamma")],
            Self::Linear => vec![free("slope"), free("intercept")],
            Self::SqrtPower => vec![free("r")],
        }
    }

    pub fn n_params(&self) -> usize {
        self.params().len()
    }

    pub fn check_bounds(&self, p: &[f64]) -> Result<()> {
        let specs = self.params();
        if p.len() != specs.len() {
            return Err(crate::error::invalid(
                "fitting",
                "params",
                format!("model `{}` takes {} parameters, got {}", self.id(), specs.len(), p.len()),
            ));
        }
        for (s, &v) in specs.iter().zip(p) {
            if !(v >= s.lo && v <= s.hi) {
                return Err(Error::OutOfBounds { param: s.name.to_string(), value: v, lo: s.lo, hi: s.hi });
            }
        }
        Ok(())
    }

    /// Model values at every x.
    pub fn eval(&self, p: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_bounds(p)?;
        self.eval_unchecked(p, x)
    }

    pub(crate) fn eval_unchecked(&self, p: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            Self::Rabi => Ok(x
                .iter()
                .map(|&t| p[0] + p[1] * (2.0 * PI * p[2] * t * 1e-3 - p[3]).cos() * (-t / p[4]).exp())
                .collect()),
            Self::Fid => Ok(x.iter().map(|&t| p[0] * (2.0 * PI * p[1] * t * 1e-3 + p[2]).cos() * (-t / p[3]).exp()).collect()),
            Self::EchoStretched => Ok(x.iter().map(|&t| p[0] * (-(t / p[1]).powf(p[2])).exp()).collect()),
            Self::T1Gamma => Ok(x.iter().map(|&t| 0.5 * p[0] * (-p[1] * t * 1e-3).exp()).collect()),
            Self::T1Alpha { gamma } => {
                let r = RelaxationRates { alpha: p[1], gamma: gamma.unwrap_or_else(|| p[2]) };
                x.iter().map(|&t| rates::rho22_minus_rho33(t, &r).map(|d| p[0] * d)).collect()
            }
            Self::PumpDelta { rho0, readout, rates: r, free_rates } => {
                let r = if free_rates { RelaxationRates { alpha: p[1], gamma: p[2] } } else { r };
                x.iter()
                    .map(|&t| rates::pump_propagate(&rho0, t, &r, PumpRate(p[0])).map(|s| readout.difference(&s.populations)))
                    .collect()
            }
            Self::Linear => Ok(x.iter().map(|&t| p[0] * t + p[1]).collect()),
            Self::SqrtPower => Ok(x.iter().map(|&t| p[0] * t).collect()),
        }
    }
}

/// Model values at `x`; fails when `params` violate the model bounds.
pub fn model_eval(model: &FitModel, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    model.eval(params, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t1_gamma_at_zero_is_half_amplitude() {
        let y = model_eval(&FitModel::T1Gamma, &[0.8, 6.8], &[0.0]).unwrap();
        assert_eq!(y[0], 0.4);
    }

    #[test]
    fn pump_delta_strong_pumping_limit() {
        let m = FitModel::PumpDelta {
            rho0: PopulationVector::UNIFORM,
            readout: ReadoutScheme::D21,
            rates: RelaxationRates::default(),
            free_rates: false,
        };
        let y = m.eval(&[1e7], &[1000.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-5);
        let FitModel::PumpDelta { rho0, rates, .. } = m else { unreachable!() };
        let m = FitModel::PumpDelta { rho0, readout: ReadoutScheme::D34, rates, free_rates: false };
        assert!((m.eval(&[1e7], &[1000.0]).unwrap()[0] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn fid_extrema_alternate() {
        let f = 40.0;
        let x: Vec<f64> = (0..6).map(|k| k as f64 * 1e3 / (2.0 * f)).collect();
        let y = FitModel::Fid.eval(&[1.0, f, 0.0, 1e9], &x).unwrap();
        for w in y.windows(2) {
            assert!(w[0] * w[1] < 0.0);
            assert!((w[0].abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bounds_enforced() {
        assert!(matches!(FitModel::EchoStretched.eval(&[1.0, 7.9, 5.0], &[1.0]), Err(Error::OutOfBounds { .. })));
        assert!(FitModel::T1Gamma.eval(&[1.0, -1.0], &[1.0]).is_err());
        assert!(FitModel::Linear.eval(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn model_ids_serialize() {
        let text = serde_json::to_string(&FitModel::T1Alpha { gamma: Some(6.8) }).unwrap();
        assert_eq!(text, r#"{"id":"t1_alpha","gamma":6.8}"#);
        let back: FitModel = serde_json::from_str(r#"{"id":"echo_stretched"}"#).unwrap();
        assert_eq!(back, FitModel::EchoStretched);
    }
}
