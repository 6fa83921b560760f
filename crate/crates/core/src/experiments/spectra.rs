// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::{Matrix4, Vector4};

use super::{check_grid, evaluate, Curve};
use crate::config::SimConfig;
use crate::engine::{readout_signal, DensityState};
use crate::error::{invalid, Error, Result};
use crate::rates::{self, PopulationVector};
use crate::spin::transition_frequencies;

/// Peak-normalized Lorentzian of full width `fwhm`.
fn lorentzian(f: f64, center: f64, fwhm: f64) -> f64 {
    let hw2 = 0.25 * fwhm * fwhm;
    hw2 / ((f - center).powi(2) + hw2)
}

fn mixing_rates(f: f64, saturation: f64, fwhm: f64, nu: &[f64; 3]) -> [f64; 3] {
    nu.map(|n| saturation * lorentzian(f, n, fwhm))
}

/// Steady state of the pumped four-level system with additional symmetric
/// mixing rates (ms⁻¹) across the three transitions.
pub fn steady_state_with_rf(cfg: &SimConfig, mixing: [f64; 3]) -> Result<PopulationVector> {
    if mixing.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(invalid("experiments", "rf_saturation", "mixing rates must be finite and >= 0"));
    }
    let mut g = rates::pump_generator(&cfg.rates, cfg.delta()?);
    for (k, w) in mixing.iter().enumerate() {
        g[(k, k)] -= w;
        g[(k + 1, k + 1)] -= w;
        g[(k, k + 1)] += w;
        g[(k + 1, k)] += w;
    }
    let mut a: Matrix4<f64> = g;
    a.row_mut(3).fill(1.0);
    let b = Vector4::new(0.0, 0.0, 0.0, 1.0);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Experiment("steady state is not unique (no pumping or relaxation)".into()))?;
    Ok(PopulationVector::new_unchecked([x[0], x[1], x[2], x[3]]))
}

fn signal(cfg: &SimConfig, rho: &PopulationVector) -> Result<f64> {
    readout_signal(&DensityState::from_populations(rho), &cfg.readout)
}

fn spectrum(
    f_grid: &[f64],
    cfg: &SimConfig,
    fixed: [f64; 3],
    saturation: f64,
    linewidth: f64,
    experiment: &str,
) -> Result<Curve> {
    check_grid(f_grid)?;
    cfg.validate()?;
    if !(linewidth > 0.0 && linewidth.is_finite()) {
        return Err(invalid("experiments", "linewidth", format!("must be > 0, got {linewidth}")));
    }
    if !(saturation >= 0.0 && saturation.is_finite()) {
        return Err(invalid("experiments", "rf_saturation", format!("must be >= 0, got {saturation}")));
    }
    let nu = transition_frequencies(&cfg.spin).as_array();
    let baseline = signal(cfg, &steady_state_with_rf(cfg, fixed)?)?;
    let y = evaluate(f_grid, |f| {
        let swept = mixing_rates(f, saturation, linewidth, &nu);
        let total = [0, 1, 2].map(|k| fixed[k] + swept[k]);
        Ok(signal(cfg, &steady_state_with_rf(cfg, total)?)? - baseline)
    })?;
    Ok(Curve::new(f_grid.to_vec(), y, experiment, "MHz", cfg)?
        .with_extra("rf_saturation", saturation)
        .with_extra("linewidth_mhz", linewidth))
}

/// cw-ODMR contrast versus RF frequency under continuous optical pumping.
pub fn cw_spectrum(f_grid: &[f64], rf_saturation: f64, linewidth: f64, cfg: &SimConfig) -> Result<Curve> {
    spectrum(f_grid, cfg, [0.0; 3], rf_saturation, linewidth, "cw_spectrum")
}

/// cw contrast of a swept source while a second source is held at `pump_at` (MHz).
pub fn double_resonance_spectrum(pump_at: f64, f_grid: &[f64], cfg: &SimConfig) -> Result<Curve> {
    if !pump_at.is_finite() {
        return Err(invalid("experiments", "pump_at", "must be finite"));
    }
    let s = cfg.spectrum;
    s.validate()?;
    let nu = transition_frequencies(&cfg.spin).as_array();
    let fixed = mixing_rates(pump_at, s.pump_saturation, s.linewidth, &nu);
    Ok(spectrum(f_grid, cfg, fixed, s.rf_saturation, s.linewidth, "double_resonance")?.with_extra("pump_at_mhz", pump_at))
}

/// Largest-magnitude value (signed) of `curve` within `half_window` of `center`.
pub fn feature_near(curve: &Curve, center: f64, half_window: f64) -> f64 {
    curve
        .x
        .iter()
        .zip(&curve.y)
        .filter(|(x, _)| (**x - center).abs() <= half_window)
        .map(|(_, y)| *y)
        .fold(0.0, |best: f64, y| if y.abs() > best.abs() { y } else { best })
}

fn nearest(curve: &Curve, x: f64) -> usize {
    let mut best = 0;
    for (i, v) in curve.x.iter().enumerate() {
        if (v - x).abs() < (curve.x[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Height of a resonance at `center` above the straight line joining the
/// curve at `center ± half_window`. Smooth wings of distant lines cancel.
pub fn local_feature(curve: &Curve, center: f64, half_window: f64) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let (a, c, b) = (nearest(curve, center - half_window), nearest(curve, center), nearest(curve, center + half_window));
    let (xa, xb) = (curve.x[a], curve.x[b]);
    let base = if xb > xa {
        curve.y[a] + (curve.y[b] - curve.y[a]) * (curve.x[c] - xa) / (xb - xa)
    } else {
        curve.y[a]
    };
    curve.y[c] - base
}
