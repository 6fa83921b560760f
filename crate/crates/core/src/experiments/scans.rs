// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::{FRAC_PI_2, PI};

use super::{check_nonnegative, evaluate, Curve, PrepId, ReadoutScheme};
use crate::config::SimConfig;
use crate::engine::{ramsey_events, run_sequence, PulseEvent, PulseSequence};
use crate::error::{invalid, Error, Result};
use crate::spin::transition_frequencies;

fn check_transition(transition: u8) -> Result<()> {
    if (1..=3).contains(&transition) {
        Ok(())
    } else {
        Err(invalid("experiments", "transition", format!("must be 1, 2 or 3, got {transition}")))
    }
}

fn readout(cfg: &SimConfig) -> PulseEvent {
    PulseEvent::Readout { duration: cfg.pump.readout_duration }
}

fn laser(cfg: &SimConfig) -> PulseEvent {
    PulseEvent::Laser { duration: cfg.pump.prep_duration, intensity: cfg.pump.intensity }
}

/// Driven Rabi nutation versus pulse length `tau_grid` (ns) at `rf_power` (W).
/// Transition 2 is bracketed by π pulses on transition 1.
pub fn rabi_scan(transition: u8, rf_power: f64, tau_grid: &[f64], cfg: &SimConfig) -> Result<Curve> {
    check_transition(transition)?;
    check_nonnegative(tau_grid, "tau")?;
    cfg.validate()?;
    let f_r = cfg.rabi.frequency(transition, rf_power)?;
    let t2r = cfg.rabi.decay_time(transition, f_r)?;
    let engine = cfg.engine();
    let bracket: &[u8] = if transition == 2 { &[1] } else { &[] };
    let y = evaluate(tau_grid, |tau_ns| {
        let tau = tau_ns * 1e-3;
        let mut main = vec![laser(cfg)];
        let mut reference = main.clone();
        main.extend(bracket.iter().map(|&t| PulseEvent::pi(t)));
        reference.extend(bracket.iter().map(|&t| PulseEvent::pi(t)));
        if f_r > 0.0 {
            main.push(PulseEvent::Rf {
                transition,
                flip_angle: 2.0 * PI * f_r * tau,
                phase: 0.0,
                drive_frequency: None,
                duration: tau,
                rabi_t2: Some(t2r),
            });
        }
        main.extend(bracket.iter().map(|&t| PulseEvent::pi(t)));
        reference.extend(bracket.iter().map(|&t| PulseEvent::pi(t)));
        main.push(readout(cfg));
        reference.push(readout(cfg));
        run_sequence(&PulseSequence::with_reference(main, reference), &engine)
    })?;
    Ok(Curve::new(tau_grid.to_vec(), y, format!("rabi_nu{transition}"), "ns", cfg)?
        .with_extra("rabi_frequency_mhz", f_r)
        .with_extra("rabi_t2_ns", t2r * 1e3)
        .with_extra("rf_power_w", rf_power))
}

/// Phase-cycled Ramsey signal versus free-evolution time `tau_grid` (ns),
/// with the first pulse detuned by `detuning` (MHz) from the transition.
pub fn fid_scan(transition: u8, detuning: f64, tau_grid: &[f64], cfg: &SimConfig) -> Result<Curve> {
    check_transition(transition)?;
    check_nonnegative(tau_grid, "tau")?;
    if !detuning.is_finite() {
        return Err(invalid("experiments", "detuning", "must be finite"));
    }
    cfg.validate()?;
    let engine = cfg.engine();
    let drive = transition_frequencies(&cfg.spin).as_array()[transition as usize - 1] - detuning;
    let laser = cfg.prep_laser();
    let y = evaluate(tau_grid, |tau_ns| {
        let tau = tau_ns * 1e-3;
        let seq = PulseSequence::with_reference(
            ramsey_events(transition, tau, 0.0, Some(drive), laser),
            ramsey_events(transition, tau, PI, Some(drive), laser),
        );
        run_sequence(&seq, &engine)
    })?;
    Ok(Curve::new(tau_grid.to_vec(), y, format!("fid_nu{transition}"), "ns", cfg)?.with_extra("detuning_mhz", detuning))
}

fn echo_events(transition: u8, tau2: f64, last_phase: f64, cfg: &SimConfig) -> Vec<PulseEvent> {
    let mut ev = vec![laser(cfg)];
    if transition == 2 {
        ev.push(PulseEvent::pi(3));
    }
    ev.push(PulseEvent::rf(transition, FRAC_PI_2, 0.0));
    ev.push(PulseEvent::Delay { duration: 0.5 * tau2 });
    ev.push(PulseEvent::rf(transition, PI, FRAC_PI_2));
    ev.push(PulseEvent::Delay { duration: 0.5 * tau2 });
    ev.push(PulseEvent::rf(transition, FRAC_PI_2, last_phase));
    if transition == 2 {
        ev.push(PulseEvent::pi(3));
    }
    ev.push(readout(cfg));
    ev
}

/// Hahn-echo amplitude (±x phase cycled) versus total dephasing time
/// `tau2_grid` (µs).
pub fn echo_scan(transition: u8, tau2_grid: &[f64], cfg: &SimConfig) -> Result<Curve> {
    check_transition(transition)?;
    check_nonnegative(tau2_grid, "tau2")?;
    cfg.validate()?;
    let engine = cfg.engine();
    let y = evaluate(tau2_grid, |tau2| {
        let seq = PulseSequence::with_reference(echo_events(transition, tau2, 0.0, cfg), echo_events(transition, tau2, PI, cfg));
        run_sequence(&seq, &engine)
    })?;
    Curve::new(tau2_grid.to_vec(), y, format!("echo_nu{transition}"), "us", cfg)
}

fn dark_delay_scan(
    prep: PrepId,
    main_pulses: &[u8],
    reference_pulses: &[u8],
    tau_grid: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    check_nonnegative(tau_grid, "tau1")?;
    cfg.validate()?;
    let engine = cfg.engine();
    let head = prep.prep(cfg.prep_laser()).events;
    evaluate(tau_grid, |tau| {
        let build = |pulses: &[u8]| {
            let mut ev = head.clone();
            ev.push(PulseEvent::Delay { duration: tau });
            ev.extend(pulses.iter().map(|&t| PulseEvent::pi(t)));
            ev.push(readout(cfg));
            ev
        };
        run_sequence(&PulseSequence::with_reference(build(main_pulses), build(reference_pulses)), &engine)
    })
}

/// Relaxation of the laser-polarized state read out on ν1 (`d21`) or ν3 (`d34`),
/// versus dark time `tau1_grid` (µs).
pub fn t1_gamma_scan(tau1_grid: &[f64], readout: ReadoutScheme, cfg: &SimConfig) -> Result<Curve> {
    if !matches!(readout, ReadoutScheme::D21 | ReadoutScheme::D34) {
        return Err(Error::Experiment(format!("t1_gamma readout must be d21 or d34, got {}", readout.name())));
    }
    let y = dark_delay_scan(PrepId::Rho1, readout.pulses(), &[], tau1_grid, cfg)?;
    Curve::new(tau1_grid.to_vec(), y, format!("t1_gamma_{}", readout.name()), "us", cfg)
}

/// Relaxation of the (+3/2, +1/2)-polarized state measured as ρ22 − ρ33,
/// versus dark time `tau1_grid` (µs).
pub fn t1_alpha_scan(tau1_grid: &[f64], cfg: &SimConfig) -> Result<Curve> {
    let y = dark_delay_scan(PrepId::Rho2, &[1], &[2, 1], tau1_grid, cfg)?;
    Curve::new(tau1_grid.to_vec(), y, "t1_alpha", "us", cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates;

    fn quiet() -> SimConfig {
        SimConfig::default().without_ensemble()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn rabi_zero_power_is_flat() {
        let c = rabi_scan(1, 0.0, &[0.0, 50.0, 100.0], &quiet()).unwrap();
        assert!(c.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rabi_matches_damped_cosine() {
        let cfg = quiet();
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 10.0).collect();
        let c = rabi_scan(1, 20.0, &grid, &cfg).unwrap();
        let (f, t2) = (5.26, 0.299);
        let st = rates::pump_from_uniform(cfg.pump.prep_duration, &cfg.rates, cfg.delta().unwrap()).unwrap();
        let half = cfg.readout.delta_contrast * cfg.readout.polarization * (st[1] - st[0]);
        for (x, y) in grid.iter().zip(&c.y) {
            let t = x * 1e-3;
            close(*y, half * (1.0 - (2.0 * PI * f * t).cos() * (-t / t2).exp()), 1e-12);
        }
        assert_eq!(c.meta.extras["rabi_frequency_mhz"], 5.26);
    }

    #[test]
    fn rabi_transition_two_uses_bracketing_pulses() {
        let c = rabi_scan(2, 20.0, &[0.0, 81.43], &quiet()).unwrap();
        assert_eq!(c.y[0], 0.0);
        assert!(c.y[1].abs() > 1e-3);
        assert!(rabi_scan(4, 20.0, &[0.0], &quiet()).is_err());
    }

    #[test]
    fn fid_oscillates_at_detuning() {
        let mut cfg = quiet();
        cfg.decoherence.t2_hom = [f64::INFINITY; 3];
        for t in 1..=3u8 {
            let c = fid_scan(t, 40.0, &[0.0, 12.5, 25.0], &cfg).unwrap();
            assert!(c.y[0].abs() > 1e-3);
            close(c.y[1], -c.y[0], 1e-9 * c.y[0].abs());
            close(c.y[2], c.y[0], 1e-9 * c.y[0].abs());
        }
    }

    #[test]
    fn echo_at_zero_equals_fid_at_zero() {
        let cfg = SimConfig { inhomogeneity: crate::engine::InhomogeneityModel { n_samples: 200, ..Default::default() }, ..Default::default() };
        for t in 1..=3u8 {
            let e = echo_scan(t, &[0.0], &cfg).unwrap();
            let f = fid_scan(t, 0.0, &[0.0], &cfg).unwrap();
            close(e.y[0], f.y[0], 1e-14);
        }
    }

    #[test]
    fn t1_gamma_readouts_agree_and_decay() {
        let cfg = quiet();
        let grid = [0.0, 50.0, 150.0, 3000.0];
        let a = t1_gamma_scan(&grid, ReadoutScheme::D21, &cfg).unwrap();
        let b = t1_gamma_scan(&grid, ReadoutScheme::D34, &cfg).unwrap();
        for k in 0..grid.len() {
            close(a.y[k], b.y[k], 1e-15);
        }
        close(a.y[1] / a.y[0], (-6.8f64 * 0.05).exp(), 1e-12);
        assert!(a.y[3].abs() < 1e-9);
        assert!(t1_gamma_scan(&grid, ReadoutScheme::D24, &cfg).is_err());
    }

    #[test]
    fn t1_alpha_follows_population_difference() {
        let cfg = quiet();
        let grid = [0.0, 40.0, 120.0];
        let c = t1_alpha_scan(&grid, &cfg).unwrap();
        let scale = c.y[0] / 0.5;
        for (x, y) in grid.iter().zip(&c.y) {
            close(*y, scale * rates::rho22_minus_rho33(*x, &cfg.rates).unwrap(), 1e-13);
        }
    }
}
