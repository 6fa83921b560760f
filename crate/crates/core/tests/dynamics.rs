// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use odmr_core::rates::{
    expm_oracle, pump_generator, pump_propagate, relax_propagate, relaxation_generator, stationary_state,
    subensemble_embed,
};
use odmr_core::{PopulationVector, PumpRate, RelaxationRates};
use proptest::prelude::*;

fn rates() -> impl Strategy<Value = RelaxationRates> {
    (0.1f64..100.0, 0.1f64..100.0).prop_map(|(alpha, gamma)| RelaxationRates { alpha, gamma })
}

fn state() -> impl Strategy<Value = PopulationVector> {
    prop::array::uniform4(0.0f64..1.0).prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3).prop_map(|w| {
        let s: f64 = w.iter().sum();
        PopulationVector(w.map(|v| v / s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relaxation_matches_oracle(r in rates(), rho in state(), t in 0.0f64..2000.0) {
        let closed = relax_propagate(&rho, t, &r).unwrap().populations;
        let oracle = expm_oracle(&relaxation_generator(&r), &rho, t).unwrap();
        prop_assert!(closed.max_abs_diff(&oracle) < 1e-10);
    }

    #[test]
    fn pumping_matches_oracle(r in rates(), d in 0.0f64..500.0, rho in state(), t in 0.0f64..2000.0) {
        let closed = pump_propagate(&rho, t, &r, PumpRate(d)).unwrap().populations;
        let oracle = expm_oracle(&pump_generator(&r, PumpRate(d)), &rho, t).unwrap();
        prop_assert!(closed.max_abs_diff(&oracle) < 1e-10);
    }

    #[test]
    fn propagation_is_a_semigroup(r in rates(), d in 0.0f64..200.0, rho in state(), s in 0.0f64..500.0, t in 0.0f64..500.0) {
        let d = PumpRate(d);
        let whole = pump_propagate(&rho, s + t, &r, d).unwrap().populations;
        let mid = pump_propagate(&rho, s, &r, d).unwrap().populations;
        let split = pump_propagate(&mid, t, &r, d).unwrap().populations;
        prop_assert!(whole.max_abs_diff(&split) < 1e-12);
    }

    #[test]
    fn populations_stay_normalized_and_positive(r in rates(), d in 0.0f64..500.0, rho in state(), t in 0.0f64..5000.0) {
        let p = pump_propagate(&rho, t, &r, PumpRate(d)).unwrap().populations;
        prop_assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.0.iter().all(|v| *v >= -1e-12));
        let q = relax_propagate(&rho, t, &r).unwrap().populations;
        prop_assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.0.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn relaxation_tends_to_uniform(r in rates(), rho in state()) {
        let p = relax_propagate(&rho, 1e6, &r).unwrap().populations;
        prop_assert!(p.max_abs_diff(&PopulationVector::UNIFORM) < 1e-12);
    }

    #[test]
    fn pumping_tends_to_stationary_state(r in rates(), d in 0.1f64..500.0, rho in state()) {
        let p = pump_propagate(&rho, 1e6, &r, PumpRate(d)).unwrap().populations;
        prop_assert!(p.max_abs_diff(&stationary_state(&r, PumpRate(d)).state) < 1e-12);
    }

    #[test]
    fn embedding_preserves_trace(rho in state(), p in 0.0f64..1.0) {
        let e = subensemble_embed(&rho, p).unwrap();
        prop_assert!((e.sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn paper_rates_reach_stationary_state() {
    let r = RelaxationRates::default();
    let d = PumpRate(39.0);
    let p = pump_propagate(&PopulationVector::UNIFORM, 1000.0, &r, d).unwrap().populations;
    assert!(p.max_abs_diff(&stationary_state(&r, d).state) < 1e-8);
    assert!((p[1] - 0.463).abs() < 5e-4);
}

#[test]
fn strong_pumping_empties_outer_levels() {
    let r = RelaxationRates::default();
    let d = PumpRate(r.gamma * 1e6);
    let p = pump_propagate(&PopulationVector::UNIFORM, 1000.0, &r, d).unwrap().populations;
    assert!(p.max_abs_diff(&PopulationVector([0.0, 0.5, 0.5, 0.0])) < 1e-6);
}

#[test]
fn gamma_free_pumping_uses_fallback() {
    let r = RelaxationRates { alpha: 9.3, gamma: 0.0 };
    let rho = PopulationVector([0.4, 0.1, 0.2, 0.3]);
    let p = pump_propagate(&rho, 50.0, &r, PumpRate(20.0)).unwrap().populations;
    let oracle = expm_oracle(&pump_generator(&r, PumpRate(20.0)), &rho, 50.0).unwrap();
    assert!(p.max_abs_diff(&oracle) < 1e-10);
}

#[test]
fn negative_time_rejected() {
    assert!(relax_propagate(&PopulationVector::UNIFORM, -1.0, &RelaxationRates::default()).is_err());
}
