// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use odmr_core::experiments::{
    differences_from_populations, echo_scan, fid_scan, pump_scan, reconstruct_populations, t1_gamma_scan, PrepId,
    ReadoutScheme,
};
use odmr_core::fitting::{fit, initial_guess, Dataset};
use odmr_core::rates::{pump_from_uniform, pump_propagate, stationary_state};
use odmr_core::{FitModel, PopulationVector, SimConfig};

fn grid(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * step).collect()
}

fn fit_curve(model: &FitModel, x: &[f64], y: &[f64]) -> odmr_core::FitResult {
    let data = Dataset::new(x.to_vec(), y.to_vec());
    fit(model, &data, &initial_guess(model, &data).unwrap()).unwrap()
}

#[test]
fn pump_scans_share_one_stationary_state() {
    let cfg = SimConfig::default().without_ensemble();
    let t = [0.0, 10.0, 1000.0];
    let finals: Vec<PopulationVector> = [PrepId::Unpolarized, PrepId::Rho3, PrepId::Rho4]
        .iter()
        .map(|&p| {
            let s = pump_scan(p, &t, &ReadoutScheme::ALL, &cfg).unwrap();
            PopulationVector(std::array::from_fn(|k| s.populations[k].y[2]))
        })
        .collect();
    for a in &finals {
        for b in &finals {
            assert!(a.max_abs_diff(b) < 1e-6);
        }
    }
}

#[test]
fn pump_scan_recovers_prepared_state_at_zero() {
    let cfg = SimConfig::default().without_ensemble();
    let s = pump_scan(PrepId::Rho3, &[0.0], &ReadoutScheme::ALL, &cfg).unwrap();
    let st = pump_from_uniform(cfg.pump.prep_duration, &cfg.rates, cfg.delta().unwrap()).unwrap();
    // ρ3 prep: pumped state with levels 3 and 4 swapped by a ν3 π pulse.
    let expected = [st[0], st[1], st[3], st[2]];
    for k in 0..4 {
        assert!((s.populations[k].y[0] - expected[k]).abs() < 1e-9);
    }
}

#[test]
fn imperfect_preparations_relax_monotonically() {
    let cfg = SimConfig::default();
    let d = cfg.delta().unwrap();
    let st = stationary_state(&cfg.rates, d).state;
    for rho in [PopulationVector([0.03, 0.47, 0.11, 0.39]), PopulationVector([0.06, 0.16, 0.36, 0.42])] {
        let diffs = differences_from_populations(&ReadoutScheme::ALL, &rho);
        assert!(reconstruct_populations(&ReadoutScheme::ALL, &diffs).unwrap().max_abs_diff(&rho) < 1e-12);
        let mut last = f64::INFINITY;
        for t in grid(200, 5.0) {
            let p = pump_propagate(&rho, t, &cfg.rates, d).unwrap().populations;
            let dist = p.max_abs_diff(&st);
            assert!(dist <= last + 1e-15);
            last = dist;
        }
    }
}

#[test]
fn t1_gamma_matches_single_exponential() {
    let cfg = SimConfig::default().without_ensemble();
    let tau = grid(60, 10.0);
    for r in [ReadoutScheme::D21, ReadoutScheme::D34] {
        let c = t1_gamma_scan(&tau, r, &cfg).unwrap();
        let f = fit_curve(&FitModel::T1Gamma, &c.x, &c.y);
        assert!(f.residual_norm < 1e-9, "{}", f.residual_norm);
        assert!((f.get("gamma").unwrap() - 6.8).abs() < 1e-6);
    }
}

#[test]
fn fid_oscillates_at_detuning() {
    let mut cfg = SimConfig::default().without_ensemble();
    cfg.decoherence.t2_hom = [1e9; 3];
    let tau = grid(101, 1.0);
    let c = fid_scan(1, 40.0, &tau, &cfg).unwrap();
    // Period 25 ns: extrema alternate in sign every 12.5 ns.
    for k in 0..4 {
        assert!((c.y[25 * k] - c.y[0]).abs() < 1e-9 * c.y[0].abs());
    }
    assert!((c.y[12] + c.y[0]).abs() < 0.05 * c.y[0].abs());
}

#[test]
fn echo_starts_at_fid_amplitude() {
    let cfg = SimConfig::default();
    for t in 1..=3 {
        let e = echo_scan(t, &[0.0], &cfg).unwrap();
        let f = fid_scan(t, 0.0, &[0.0], &cfg).unwrap();
        assert!((e.y[0] - f.y[0]).abs() < 1e-12, "{t}");
    }
}

#[test]
fn echo_decay_returns_homogeneous_times() {
    let cfg = SimConfig::default();
    let tau = grid(41, 0.5);
    for t in 1..=3u8 {
        let c = echo_scan(t, &tau, &cfg).unwrap();
        let f = fit_curve(&FitModel::EchoStretched, &c.x, &c.y);
        let t2 = cfg.decoherence.t2_hom[t as usize - 1];
        assert!((f.get("t2").unwrap() - t2).abs() < 0.02 * t2, "{t}: {:?}", f.params);
    }
}
