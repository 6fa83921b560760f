// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{check_nonnegative, Curve, PrepId, ReadoutScheme};
use crate::config::SimConfig;
use crate::engine::{run_sequence, EngineConfig, PulseEvent, PulseSequence};
use crate::error::{Error, Result};
use crate::rates::PopulationVector;

/// Output of an optical-pumping transient scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpScan {
    /// One normalized population difference ρ_a − ρ_b per readout scheme.
    pub differences: Vec<Curve>,
    /// ρ11 … ρ44 reconstructed at each laser duration.
    pub populations: [Curve; 4],
    /// Factor converting a readout signal into a population difference.
    pub scale: f64,
}

fn difference_matrix(readouts: &[ReadoutScheme]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(readouts.len(), 4);
    for (i, r) in readouts.iter().enumerate() {
        let (hi, lo) = r.levels();
        a[(i, hi)] = 1.0;
        a[(i, lo)] = -1.0;
    }
    a
}

fn check_rank(readouts: &[ReadoutScheme]) -> Result<()> {
    let rank = if readouts.is_empty() { 0 } else { difference_matrix(readouts).rank(1e-10) };
    if rank < 3 {
        return Err(Error::Experiment(format!(
            "readout set has {rank} independent population differences; at least 3 are needed"
        )));
    }
    Ok(())
}

pub fn differences_from_populations(readouts: &[ReadoutScheme], rho: &PopulationVector) -> Vec<f64> {
    readouts.iter().map(|r| r.difference(rho)).collect()
}

/// Least-squares populations from measured differences plus the sum rule.
pub fn reconstruct_populations(readouts: &[ReadoutScheme], diffs: &[f64]) -> Result<PopulationVector> {
    if readouts.len() != diffs.len() {
        return Err(Error::Experiment(format!("{} readouts but {} differences", readouts.len(), diffs.len())));
    }
    check_rank(readouts)?;
    let n = readouts.len();
    let mut a = DMatrix::zeros(n + 1, 4);
    a.view_mut((0, 0), (n, 4)).copy_from(&difference_matrix(readouts));
    a.row_mut(n).fill(1.0);
    let mut b = DVector::zeros(n + 1);
    b.rows_mut(0, n).copy_from_slice(diffs);
    b[n] = 1.0;
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Experiment(format!("population reconstruction failed: {e}")))?;
    Ok(PopulationVector::new_unchecked([x[0], x[1], x[2], x[3]]))
}

fn readout_pair(head: &[PulseEvent], scheme: ReadoutScheme, readout_duration: f64) -> PulseSequence {
    let mut main = head.to_vec();
    main.extend(scheme.events());
    main.push(PulseEvent::Readout { duration: readout_duration });
    let mut reference = head.to_vec();
    reference.push(PulseEvent::Readout { duration: readout_duration });
    PulseSequence::with_reference(main, reference)
}

/// Signal-to-population-difference factor. Without a configured
/// normalization it follows from the readout model; otherwise the
/// stationary ρ33 − ρ44 is scaled to the configured value.
fn normalization_scale(cfg: &SimConfig, engine: &EngineConfig) -> Result<f64> {
    let contrast = 2.0 * cfg.readout.delta_contrast * cfg.readout.polarization;
    if contrast == 0.0 {
        return Err(Error::Experiment("readout model has no spin contrast".into()));
    }
    match cfg.normalization {
        None => Ok(1.0 / contrast),
        Some(target) => {
            let head = PrepId::Rho1.prep(cfg.prep_laser()).events;
            let s = run_sequence(&readout_pair(&head, ReadoutScheme::D34, cfg.pump.readout_duration), engine)?;
            if s == 0.0 {
                return Err(Error::Experiment("stationary ρ33 − ρ44 signal vanishes".into()));
            }
            Ok(target / s)
        }
    }
}

/// Laser-duration scan from `prep`: every readout in `readouts` is taken
/// after a pumping pulse of each duration in `t_grid` (µs) and the four
/// populations are rebuilt from the differences and the sum rule.
pub fn pump_scan(prep: PrepId, t_grid: &[f64], readouts: &[ReadoutScheme], cfg: &SimConfig) -> Result<PumpScan> {
    check_nonnegative(t_grid, "t")?;
    check_rank(readouts)?;
    cfg.validate()?;
    let engine = cfg.engine();
    let scale = normalization_scale(cfg, &engine)?;
    let head = prep.prep(cfg.prep_laser()).events;
    let rows: Vec<Vec<f64>> = t_grid
        .par_iter()
        .map(|&t| {
            let mut ev = head.clone();
            ev.push(PulseEvent::Laser { duration: t, intensity: cfg.pump.intensity });
            readouts
                .iter()
                .map(|&r| run_sequence(&readout_pair(&ev, r, cfg.pump.readout_duration), &engine).map(|s| s * scale))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let pops: Vec<PopulationVector> = rows.iter().map(|d| reconstruct_populations(readouts, d)).collect::<Result<_>>()?;

    let name = prep.name();
    let differences = readouts
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let y = rows.iter().map(|row| row[i]).collect();
            Curve::new(t_grid.to_vec(), y, format!("pump_{name}_{}", r.name()), "us", cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let level = |k: usize| {
        let y = pops.iter().map(|p| p[k]).collect();
        Curve::new(t_grid.to_vec(), y, format!("pump_{name}_rho{}{}", k + 1, k + 1), "us", cfg)
    };
    Ok(PumpScan { differences, populations: [level(0)?, level(1)?, level(2)?, level(3)?], scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates;

    #[test]
    fn too_few_readouts_rejected() {
        let cfg = SimConfig::default().without_ensemble();
        let err = pump_scan(PrepId::Unpolarized, &[0.0], &[ReadoutScheme::D21, ReadoutScheme::D34], &cfg);
        assert!(matches!(err, Err(Error::Experiment(_))));
        assert!(reconstruct_populations(&[ReadoutScheme::D21], &[0.1]).is_err());
    }

    #[test]
    fn reconstruction_round_trip() {
        let rho = PopulationVector([0.03, 0.47, 0.11, 0.39]);
        for set in [&ReadoutScheme::ALL[..], &ReadoutScheme::ALL[..3], &ReadoutScheme::ALL[1..]] {
            let d = differences_from_populations(set, &rho);
            let back = reconstruct_populations(set, &d).unwrap();
            assert!(back.max_abs_diff(&rho) < 1e-12, "{set:?}");
            let again = differences_from_populations(set, &back);
            for (a, b) in d.iter().zip(&again) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unpolarized_scan_follows_closed_form() {
        let cfg = SimConfig::default().without_ensemble();
        let grid = [0.0, 20.0, 100.0, 1000.0];
        let scan = pump_scan(PrepId::Unpolarized, &grid, &ReadoutScheme::ALL, &cfg).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let expected = rates::pump_from_uniform(t, &cfg.rates, cfg.delta().unwrap()).unwrap();
            for k in 0..4 {
                assert!((scan.populations[k].y[i] - expected[k]).abs() < 1e-9, "t={t} k={k}");
            }
        }
        let st = rates::stationary_state(&cfg.rates, cfg.delta().unwrap()).state;
        assert!((scan.populations[1].y[3] - st[1]).abs() < 1e-9);
        assert!((st[1] - 0.4616).abs() < 1e-4);
    }

    #[test]
    fn configured_normalization_rescales() {
        let mut cfg = SimConfig::default().without_ensemble();
        cfg.normalization = Some(0.37);
        let scan = pump_scan(PrepId::Rho1, &[0.0], &[ReadoutScheme::D34, ReadoutScheme::D21, ReadoutScheme::D24], &cfg).unwrap();
        assert!((scan.differences[0].y[0] - 0.37).abs() < 1e-12);
    }
}
