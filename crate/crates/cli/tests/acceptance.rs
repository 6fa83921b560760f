// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use odmr_cli::{run_pipeline, RunConfig};
use odmr_core::config::RabiMode;
use odmr_core::engine::{calibrate_inhomogeneity, ensemble_statistics, InhomogeneityModel, MEASURED_T2_STAR};

use odmr_core::experiments::{
    cw_spectrum, double_resonance_spectrum, echo_scan, local_feature, rabi_scan, t1_alpha_scan, t1_gamma_scan, ReadoutScheme,
};
use odmr_core::fitting::{fit, initial_guess, synth, Dataset};
use odmr_core::rates::{
    expm_oracle, pump_generator, pump_propagate, relax_propagate, relaxation_generator, stationary_state,
};
use odmr_core::spin::transition_frequencies;
use odmr_core::{FitModel, PopulationVector, PumpRate, RelaxationRates, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn grid(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * step).collect()
}

fn fit_curve(model: &FitModel, x: &[f64], y: &[f64]) -> Result<odmr_core::FitResult, String> {
    let data = Dataset::new(x.to_vec(), y.to_vec());
    let init = initial_guess(model, &data).map_err(|e| e.to_string())?;
    fit(model, &data, &init).map_err(|e| e.to_string())
}

fn random_state(rng: &mut ChaCha8Rng) -> PopulationVector {
    let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let s: f64 = w.iter().sum();
    PopulationVector(w.map(|v| v / s))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r = RelaxationRates { alpha: rng.random_range(0.1..50.0), gamma: rng.random_range(0.1..50.0) };
        let d = PumpRate(rng.random_range(0.0..200.0));
        let rho = random_state(&mut rng);
        let t = rng.random_range(0.0..1000.0);
        let relax = relax_propagate(&rho, t, &r).map_err(|e| e.to_string())?.populations;
        let relax_ref = expm_oracle(&relaxation_generator(&r), &rho, t).map_err(|e| e.to_string())?;
        let pump = pump_propagate(&rho, t, &r, d).map_err(|e| e.to_string())?.populations;
        let pump_ref = expm_oracle(&pump_generator(&r, d), &rho, t).map_err(|e| e.to_string())?;
        worst = worst.max(relax.max_abs_diff(&relax_ref)).max(pump.max_abs_diff(&pump_ref));
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-10 && secs < 10.0, format!("max deviation {worst:.2e} over 1000 draws in {secs:.2} s"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::default().without_ensemble();
    let tau = grid(81, 10.0);
    let g = t1_gamma_scan(&tau, ReadoutScheme::D21, &cfg).map_err(|e| e.to_string())?;
    let gamma = fit_curve(&FitModel::T1Gamma, &g.x, &g.y)?.get("gamma").unwrap();
    let a = t1_alpha_scan(&tau, &cfg).map_err(|e| e.to_string())?;
    let alpha = fit_curve(&FitModel::T1Alpha { gamma: Some(gamma) }, &a.x, &a.y)?.get("alpha").unwrap();
    let (t1g, t1a) = (1e3 / gamma, 1e3 / alpha);
    let secs = start.elapsed().as_secs_f64();
    check(
        rel(gamma, 6.8) < 0.02 && rel(alpha, 9.3) < 0.05 && rel(t1g, 146.2) < 0.02 && rel(t1a, 107.3) < 0.05 && secs < 30.0,
        format!("gamma {gamma:.4} (T1 {t1g:.1} us), alpha {alpha:.4} (T1 {t1a:.1} us) in {secs:.2} s"),
    )
}

fn criterion_3() -> Outcome {
    let cfg = SimConfig::default();
    let d = cfg.delta().map_err(|e| e.to_string())?;
    let r = cfg.rates;
    let late = pump_propagate(&PopulationVector::UNIFORM, 1000.0, &r, d).map_err(|e| e.to_string())?.populations;
    let (g, dv) = (r.gamma, d.0);
    let outer = g / (4.0 * (g + dv));
    let inner = outer + dv / (2.0 * (g + dv));
    let closed = PopulationVector([outer, inner, inner, outer]);
    let e1 = late.max_abs_diff(&closed).max(late.max_abs_diff(&stationary_state(&r, d).state));
    let strong = PumpRate(r.gamma * 1e6);
    let limit = pump_propagate(&PopulationVector::UNIFORM, 1000.0, &r, strong).map_err(|e| e.to_string())?.populations;
    let e2 = limit.max_abs_diff(&PopulationVector([0.0, 0.5, 0.5, 0.0]));
    check(e1 < 1e-8 && e2 < 1e-6, format!("t = 1000 us deviation {e1:.2e}, strong-pumping deviation {e2:.2e}"))
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig { output: dir.path().join("run"), ..RunConfig::default() };
    let (s, _) = run_pipeline(&cfg).map_err(|e| format!("{e:#}"))?;
    let at = s.sweep.iter().find(|p| (p.intensity - 622.64).abs() < 1e-9).map(|p| p.delta.value).ok_or("no 622.64 point")?;
    check(
        rel(s.slope.value, 0.06) < 0.05 && (at - 39.0).abs() <= 3.0,
        format!("slope {:.5}, delta(622.64) {at:.3}", s.slope.value),
    )
}

fn criterion_5() -> Outcome {
    let cfg = SimConfig::default().without_ensemble();
    let tau = grid(401, 2.5);
    let mut fitted = Vec::new();
    for t in 1..=3u8 {
        let c = rabi_scan(t, 20.0, &tau, &cfg).map_err(|e| e.to_string())?;
        fitted.push(fit_curve(&FitModel::Rabi, &c.x, &c.y)?.get("f_r").unwrap());
    }
    let fit_ok = fitted.iter().zip([5.26, 6.14, 4.29]).all(|(f, want)| rel(*f, want) < 1e-3);

    let mut ideal = cfg;
    ideal.rabi.mode = RabiMode::Ideal;
    let mut f = Vec::new();
    for t in 1..=3u8 {
        let c = rabi_scan(t, 20.0, &[0.0, 2.5], &ideal).map_err(|e| e.to_string())?;
        f.push(c.meta.extras["rabi_frequency_mhz"]);
    }
    let s3 = 3f64.sqrt() / 2.0;
    let ratio_err = (f[0] / f[1] - s3).abs().max((f[2] / f[1] - s3).abs());
    check(
        fit_ok && ratio_err < 1e-9,
        format!("fitted f_R {:.5}/{:.5}/{:.5} MHz, ideal ratio deviation {ratio_err:.1e}", fitted[0], fitted[1], fitted[2]),
    )
}

fn criterion_6() -> Outcome {
    let mut flat = SimConfig::default();
    flat.decoherence.t2_hom = [1e12; 3];
    flat.rates = RelaxationRates { alpha: 1e-9, gamma: 1e-9 };
    flat.inhomogeneity = InhomogeneityModel { n_samples: 10_000, ..InhomogeneityModel::default() };
    let mut spread = 0.0f64;
    for t in 1..=3u8 {
        let c = echo_scan(t, &[0.0, 1.0, 5.0, 20.0], &flat).map_err(|e| e.to_string())?;
        for y in &c.y {
            spread = spread.max((y - c.y[0]).abs() / c.y[0].abs());
        }
    }

    let cfg = SimConfig::default();
    let tau = grid(41, 0.5);
    let mut t2 = Vec::new();
    for t in 1..=3u8 {
        let c = echo_scan(t, &tau, &cfg).map_err(|e| e.to_string())?;
        t2.push(fit_curve(&FitModel::EchoStretched, &c.x, &c.y)?.get("t2").unwrap());
    }
    let fit_ok = t2.iter().zip(cfg.decoherence.t2_hom).all(|(a, b)| rel(*a, b) < 0.02);
    check(
        spread < 1e-6 && fit_ok,
        format!("relative echo spread {spread:.1e}, fitted T2 {:.3}/{:.3}/{:.3} us", t2[0], t2[1], t2[2]),
    )
}

fn criterion_7() -> Outcome {
    let cfg = SimConfig::default();
    let c = calibrate_inhomogeneity(MEASURED_T2_STAR, cfg.decoherence.t2_hom).map_err(|e| e.to_string())?;
    let engine = ensemble_statistics(&cfg.engine(), cfg.prep_laser()).map_err(|e| e.to_string())?;
    let within = |v: [f64; 3]| v.iter().zip(MEASURED_T2_STAR).all(|(a, b)| rel(*a, b) <= 0.2);
    let ordered = |v: [f64; 3]| v[1] > 3.0 * v[0] && v[1] > 3.0 * v[2];
    let ns = |v: [f64; 3]| format!("{:.1}/{:.1}/{:.1} ns", v[0] * 1e3, v[1] * 1e3, v[2] * 1e3);
    check(
        within(c.predicted) && within(engine) && ordered(engine),
        format!(
            "sigma_D {:.4} MHz, sigma_B {:.4} MHz, predicted {}, engine {}",
            c.sigma_d,
            c.sigma_b,
            ns(c.predicted),
            ns(engine)
        ),
    )
}

struct Case {
    model: FitModel,
    truth: Vec<f64>,
    x: Vec<f64>,
    /// Indices of additive offsets and phases, whose errors are scaled by
    /// the signal amplitude and by π respectively.
    offsets: &'static [usize],
    phases: &'static [usize],
}

fn fit_cases() -> Vec<Case> {
    // α only acts on an asymmetric start, so the joint fit starts from (½, 0, ½, 0).
    // A single transient pins δ and γ but hardly α; that variant is reported
    // at SNR 20 without being gated.
    let pump = |free_rates| FitModel::PumpDelta {
        rho0: if free_rates { PopulationVector([0.5, 0.0, 0.5, 0.0]) } else { PopulationVector::UNIFORM },
        readout: ReadoutScheme::D21,
        rates: RelaxationRates::default(),
        free_rates,
    };
    let c = |model, truth: &[f64], x, offsets, phases| Case { model, truth: truth.to_vec(), x, offsets, phases };
    vec![
        c(FitModel::Rabi, &[0.01, 0.032, 5.26, 0.3, 299.0], grid(601, 2.5), &[0], &[3]),
        c(FitModel::Fid, &[0.016, 40.0, 0.3, 46.0], grid(301, 0.5), &[], &[2]),
        c(FitModel::EchoStretched, &[0.032, 7.9, 2.23], grid(101, 0.2), &[], &[]),
        c(FitModel::T1Gamma, &[0.04, 6.8], grid(101, 5.0), &[], &[]),
        c(FitModel::T1Alpha { gamma: Some(6.8) }, &[0.04, 9.3], grid(101, 5.0), &[], &[]),
        c(FitModel::T1Alpha { gamma: None }, &[0.04, 9.3, 6.8], grid(401, 2.0), &[], &[]),
        c(pump(false), &[39.0], grid(201, 1.0), &[], &[]),
        c(pump(true), &[39.0, 9.3, 6.8], grid(201, 2.0), &[], &[]),
        c(FitModel::Linear, &[0.06, 0.5], vec![100.0, 250.0, 400.0, 622.64, 800.0], &[1], &[]),
        c(FitModel::SqrtPower, &[1.176], [1.0f64, 5.0, 10.0, 15.0, 20.0].map(f64::sqrt).to_vec(), &[], &[]),
    ]
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn criterion_8() -> Outcome {
    let mut worst_exact = 0.0f64;
    let mut worst_noisy = 0.0f64;
    let mut report = Vec::new();
    for case in fit_cases() {
        let clean = synth(&case.model, &case.truth, &case.x, 0.0, 0).map_err(|e| e.to_string())?;
        let r = fit(&case.model, &clean, &initial_guess(&case.model, &clean).map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e}", case.model.id()))?;
        for (p, t) in r.params.iter().zip(&case.truth) {
            worst_exact = worst_exact.max(rel(*p, *t));
        }

        let amp = clean.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = |k: usize, t: f64| {
            if case.offsets.contains(&k) {
                amp
            } else if case.phases.contains(&k) {
                std::f64::consts::PI
            } else {
                t.abs()
            }
        };
        let mut errors: Vec<Vec<f64>> = vec![Vec::new(); case.truth.len()];
        for trial in 0..100u64 {
            let data = synth(&case.model, &case.truth, &case.x, amp / 20.0, 1000 + trial).map_err(|e| e.to_string())?;
            let init = initial_guess(&case.model, &data).map_err(|e| e.to_string())?;
            let r = fit(&case.model, &data, &init).map_err(|e| format!("{} trial {trial}: {e}", case.model.id()))?;
            for (k, (p, t)) in r.params.iter().zip(&case.truth).enumerate() {
                errors[k].push((p - t).abs() / scale(k, *t));
            }
        }
        let medians: Vec<f64> = errors.into_iter().map(median).collect();
        let m = medians.iter().fold(0.0f64, |a, b| a.max(*b));
        let label = match case.model {
            FitModel::T1Alpha { gamma: None } | FitModel::PumpDelta { free_rates: true, .. } => format!("{} (joint)", case.model.id()),
            _ => case.model.id().to_string(),
        };
        if matches!(case.model, FitModel::PumpDelta { free_rates: true, .. }) {
            report.push(format!("{label} {:.1}% (not gated)", 100.0 * m));
            continue;
        }
        worst_noisy = worst_noisy.max(m);
        report.push(format!("{label} {:.1}%", 100.0 * m));
    }
    check(
        worst_exact < 1e-6 && worst_noisy <= 0.10,
        format!("noise-free worst {worst_exact:.1e}; SNR 20 median errors: {}", report.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let cfg = SimConfig::default();
    let s = cfg.spectrum;
    let nu = transition_frequencies(&cfg.spin);
    let f: Vec<f64> = (0..=1200).map(|i| 40.0 + 0.1 * i as f64).collect();
    let bare = cw_spectrum(&f, s.rf_saturation, s.linewidth, &cfg).map_err(|e| e.to_string())?;
    let exact = cw_spectrum(&[nu.nu1, nu.nu2, nu.nu3], s.rf_saturation, s.linewidth, &cfg).map_err(|e| e.to_string())?;
    let (p1, p3) = (exact.y[0], exact.y[2]);
    let opposite = p1 * p3 < 0.0;
    let residual = local_feature(&bare, nu.nu2, 5.0);
    let silent = residual.abs() < 1e-2 * p1.abs().min(p3.abs());
    let pumped = local_feature(&double_resonance_spectrum(nu.nu1, &f, &cfg).map_err(|e| e.to_string())?, nu.nu2, 5.0);
    let enhanced = pumped.abs() >= 100.0 * residual.abs();
    check(
        opposite && silent && enhanced,
        format!(
            "nu1 peak {p1:.3e} and nu3 peak {p3:.3e} ({} sign), nu2 residual {residual:.2e}, pumped nu2 feature {pumped:.3e} ({:.0}x)",
            if opposite { "opposite" } else { "same" },
            pumped.abs() / residual.abs()
        ),
    )
}

fn run_in(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_odmr")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let out = dir.join("out");
    if let Ok(entries) = std::fs::read_dir(&out) {
        for e in entries.flatten() {
            files.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default());
        }
    }
    files
}

const DETERMINISM_CONFIGS: [(&str, &str); 4] = [
    ("fid", "[experiment]\nid = \"fid\"\ntransition = 1\ndetuning = 40.0\ntau = { start = 0.0, stop = 200.0, step = 2.0 }\nnoise = 0.05\n"),
    ("echo", "[experiment]\nid = \"echo\"\ntransition = 2\ntau = { start = 0.0, stop = 10.0, step = 0.5 }\nnoise = 0.05\n"),
    ("pump", "[experiment]\nid = \"pump\"\nprep = \"rho3\"\nt = { start = 0.0, stop = 100.0, step = 1.0 }\nnoise = 0.02\n"),
    ("pipeline", "[pipeline]\nnoise = 0.02\nintensities = [100.0, 400.0, 622.64]\n"),
];

fn commands_for(name: &str) -> Vec<Vec<&'static str>> {
    let base = ["--config", "run.toml", "--seed", "7", "--out", "out/run"];
    let with = |rest: &[&'static str]| base.iter().copied().chain(rest.iter().copied()).collect::<Vec<_>>();
    match name {
        "fid" => vec![with(&["levels"]), with(&["simulate"]), with(&["spectrum", "--pump-at", "75.572"])],
        "echo" => vec![with(&["simulate"]), with(&["fit", "--model", "echo_stretched", "out/run_echo_nu2.csv"])],
        "pump" => vec![with(&["simulate"]), with(&["fit", "--model", "pump_delta", "--rho0", "0,0,0.5,0.5", "--readout", "d21", "--column", "d21", "out/run_pump_rho3.csv"])],
        _ => vec![with(&["pipeline"])],
    }
}

fn criterion_10() -> Outcome {
    let mut compared = 0usize;
    for (name, body) in DETERMINISM_CONFIGS {
        let mut runs = Vec::new();
        for threads in ["1", "4", "4"] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            std::fs::write(dir.path().join("run.toml"), body).map_err(|e| e.to_string())?;
            for args in commands_for(name) {
                let mut full = vec!["--threads", threads];
                full.extend(args);
                run_in(dir.path(), &full)?;
            }
            runs.push(snapshot(dir.path()));
        }
        if runs[0].is_empty() {
            return Err(format!("{name}: no output files"));
        }
        for r in &runs[1..] {
            if r != &runs[0] {
                let differing: Vec<_> = runs[0].keys().filter(|k| r.get(*k) != runs[0].get(*k)).collect();
                return Err(format!("{name}: outputs differ across runs: {differing:?}"));
            }
        }
        compared += runs[0].len();
    }
    check(true, format!("{compared} output files byte-identical across --threads 1/4 and reruns"))
}

fn main() -> ExitCode {
    let criteria: [(u8, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail})");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
