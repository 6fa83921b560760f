// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use odmr_core::engine::run_sequence;
use odmr_core::experiments::{
    cw_spectrum, double_resonance_spectrum, echo_scan, fid_scan, pump_scan, rabi_scan, reconstruct_populations,
    t1_alpha_scan, t1_gamma_scan, ReadoutScheme,
};
use odmr_core::fitting::{fit, initial_guess};
use odmr_core::spin::field_sweep;
use odmr_core::{Curve, FitModel, FitResult, PopulationVector, PulseSequence, RelaxationRates};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, RunConfig};
use crate::dataset::read_dataset;
use crate::output::{path_for, write_csv, write_json, GIT_DESCRIBE};

/// Significant digits of curve and result tables.
pub const CSV_DIGITS: usize = 9;
/// Significant digits of the level tables.
pub const LEVEL_DIGITS: usize = 6;

/// Metadata written next to every table.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub experiment: String,
    pub files: Vec<String>,
    pub x_unit: String,
    pub config_hash: String,
    pub seed: u64,
    pub git_describe: &'static str,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
    pub config: &'a RunConfig,
}

/// Column table ready for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub x_unit: String,
    pub extras: BTreeMap<String, f64>,
}

impl Table {
    pub fn from_curve(c: &Curve) -> Self {
        Self {
            name: c.meta.experiment.clone(),
            header: vec!["x".into(), "y".into()],
            rows: c.x.iter().zip(&c.y).map(|(x, y)| vec![*x, *y]).collect(),
            x_unit: c.meta.x_unit.clone(),
            extras: c.meta.extras.clone(),
        }
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes `{prefix}_{name}.csv` plus its `.json` sidecar; returns both paths.
pub fn emit(table: &Table, cfg: &RunConfig, prefix: &Path, digits: usize) -> anyhow::Result<Vec<PathBuf>> {
    let csv = path_for(prefix, &format!("_{}.csv", table.name));
    let json = path_for(prefix, &format!("_{}.json", table.name));
    let header: Vec<&str> = table.header.iter().map(String::as_str).collect();
    write_csv(&csv, &header, &table.rows, digits)?;
    let sidecar = Sidecar {
        experiment: table.name.clone(),
        files: vec![file_name(&csv)],
        x_unit: table.x_unit.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        git_describe: GIT_DESCRIBE,
        extras: table.extras.clone(),
        config: cfg,
    };
    write_json(&json, &sidecar)?;
    Ok(vec![csv, json])
}

/// Energy levels and transition frequencies over the configured field grid.
pub fn levels_tables(cfg: &RunConfig) -> anyhow::Result<[Table; 2]> {
    let b = cfg.levels.b_values.points("levels.b_values")?;
    let rows = field_sweep(&cfg.spin, &b)?;
    let table = |name: &str, header: &[&str], f: &dyn Fn(&odmr_core::spin::LevelRow) -> Vec<f64>| Table {
        name: name.into(),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: rows.iter().map(f).collect(),
        x_unit: "mT".into(),
        extras: BTreeMap::new(),
    };
    Ok([
        table("levels", &["B_mT", "E_p32", "E_p12", "E_m12", "E_m32"], &|r| {
            let e = r.levels.energies;
            vec![r.b_mt, e[0], e[1], e[2], e[3]]
        }),
        table("transitions", &["B_mT", "nu1", "nu2", "nu3"], &|r| {
            let t = r.transitions;
            vec![r.b_mt, t.nu1, t.nu2, t.nu3]
        }),
    ])
}

pub fn cmd_levels(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in levels_tables(cfg)? {
        written.extend(emit(&t, cfg, &cfg.output, LEVEL_DIGITS)?);
    }
    Ok(written)
}

fn noisy(c: Curve, noise: f64, cfg: &RunConfig) -> anyhow::Result<Curve> {
    if noise < 0.0 || !noise.is_finite() {
        bail!("experiments: noise must be finite and >= 0, got {noise}");
    }
    Ok(c.with_noise(noise * cfg.readout.delta_contrast, cfg.seed)?)
}

fn check_transition(t: u8) -> anyhow::Result<u8> {
    if !(1..=3).contains(&t) {
        bail!("experiments: transition must be 1, 2 or 3, got {t}");
    }
    Ok(t)
}

/// Runs the configured experiment.
pub fn simulate_table(cfg: &RunConfig) -> anyhow::Result<Table> {
    let sim = cfg.sim();
    let table = match &cfg.experiment {
        Experiment::Rabi { transition, power, tau, noise } => {
            let c = rabi_scan(check_transition(*transition)?, *power, &tau.points("experiment.tau")?, &sim)?;
            Table::from_curve(&noisy(c, *noise, cfg)?)
        }
        Experiment::Fid { transition, detuning, tau, noise } => {
            let c = fid_scan(check_transition(*transition)?, *detuning, &tau.points("experiment.tau")?, &sim)?;
            Table::from_curve(&noisy(c, *noise, cfg)?)
        }
        Experiment::Echo { transition, tau, noise } => {
            let c = echo_scan(check_transition(*transition)?, &tau.points("experiment.tau")?, &sim)?;
            Table::from_curve(&noisy(c, *noise, cfg)?)
        }
        Experiment::T1Gamma { readout, tau, noise } => {
            let c = t1_gamma_scan(&tau.points("experiment.tau")?, *readout, &sim)?;
            Table::from_curve(&noisy(c, *noise, cfg)?)
        }
        Experiment::T1Alpha { tau, noise } => {
            let c = t1_alpha_scan(&tau.points("experiment.tau")?, &sim)?;
            Table::from_curve(&noisy(c, *noise, cfg)?)
        }
        Experiment::Pump { prep, t, readouts, noise } => {
            let scan = pump_scan(*prep, &t.points("experiment.t")?, readouts, &sim)?;
            let diffs: Vec<Curve> = scan
                .differences
                .into_iter()
                .enumerate()
                .map(|(k, c)| {
                    let sigma = noise * cfg.readout.delta_contrast * scan.scale;
                    c.with_noise(sigma, cfg.seed.wrapping_add(k as u64))
                })
                .collect::<odmr_core::Result<_>>()?;
            let mut header = vec!["t_us".to_string()];
            header.extend(readouts.iter().map(|r| r.name().to_string()));
            header.extend(["rho11", "rho22", "rho33", "rho44"].map(String::from));
            let mut rows = Vec::with_capacity(diffs[0].len());
            for i in 0..diffs[0].len() {
                let d: Vec<f64> = diffs.iter().map(|c| c.y[i]).collect();
                let p = reconstruct_populations(readouts, &d)?;
                let mut row = vec![diffs[0].x[i]];
                row.extend(&d);
                row.extend(p.0);
                rows.push(row);
            }
            let mut extras = BTreeMap::from([("scale".to_string(), scan.scale)]);
            if *noise > 0.0 {
                extras.insert("noise_sigma".into(), noise * cfg.readout.delta_contrast * scan.scale);
            }
            Table { name: format!("pump_{}", prep.name()), header, rows, x_unit: "us".into(), extras }
        }
        Experiment::Cw { f } => {
            let s = sim.spectrum;
            Table::from_curve(&cw_spectrum(&f.points("experiment.f")?, s.rf_saturation, s.linewidth, &sim)?)
        }
        Experiment::DoubleResonance { pump_at, f } => {
            Table::from_curve(&double_resonance_spectrum(*pump_at, &f.points("experiment.f")?, &sim)?)
        }
        Experiment::Sequence { path } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("experiments: cannot read sequence file {}", path.display()))?;
            let seq: PulseSequence =
                toml::from_str(&text).map_err(|e| anyhow::anyhow!("sequence {}: {}", path.display(), e.to_string().trim_end()))?;
            sim.validate()?;
            let signal = run_sequence(&seq, &sim.engine())?;
            Table {
                name: "sequence".into(),
                header: vec!["signal".into()],
                rows: vec![vec![signal]],
                x_unit: String::new(),
                extras: BTreeMap::new(),
            }
        }
    };
    Ok(table)
}

pub fn cmd_simulate(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let table = simulate_table(cfg).with_context(|| format!("simulate `{}`", cfg.experiment.id()))?;
    emit(&table, cfg, &cfg.output, CSV_DIGITS)
}

pub fn spectrum_table(cfg: &RunConfig, pump_at: Option<f64>) -> anyhow::Result<Table> {
    let sim = cfg.sim();
    let f = cfg.spectra.f.points("spectra.f")?;
    let c = match pump_at.or(cfg.spectra.pump_at) {
        Some(p) => double_resonance_spectrum(p, &f, &sim)?,
        None => cw_spectrum(&f, sim.spectrum.rf_saturation, sim.spectrum.linewidth, &sim)?,
    };
    Ok(Table::from_curve(&c).renamed("spectrum"))
}

pub fn cmd_spectrum(cfg: &RunConfig, pump_at: Option<f64>) -> anyhow::Result<Vec<PathBuf>> {
    emit(&spectrum_table(cfg, pump_at)?, cfg, &cfg.output, CSV_DIGITS)
}

/// Model selection and options of the `fit` subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOptions {
    pub model: String,
    /// Held γ for `t1_alpha`, held rates for `pump_delta`.
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub rho0: Option<Vec<f64>>,
    pub readout: Option<String>,
    pub free_rates: bool,
    pub init: Option<Vec<f64>>,
    /// Ordinate column; `x`/`y` headers are expected when absent.
    pub column: Option<String>,
}

fn parse_readout(name: &str) -> anyhow::Result<ReadoutScheme> {
    ReadoutScheme::ALL
        .into_iter()
        .find(|r| r.name() == name)
        .with_context(|| format!("fit: unknown readout `{name}` (expected d21, d34, d24 or d31)"))
}

impl FitOptions {
    pub fn build(&self) -> anyhow::Result<FitModel> {
        let held = RelaxationRates {
            alpha: self.alpha.unwrap_or(RelaxationRates::default().alpha),
            gamma: self.gamma.unwrap_or(RelaxationRates::default().gamma),
        };
        let model = match self.model.as_str() {
            "rabi" => FitModel::Rabi,
            "fid" => FitModel::Fid,
            "echo_stretched" => FitModel::EchoStretched,
            "t1_gamma" => FitModel::T1Gamma,
            "t1_alpha" => FitModel::T1Alpha { gamma: self.gamma },
            "pump_delta" => {
                let rho0 = match &self.rho0 {
                    None => PopulationVector::UNIFORM,
                    Some(v) => {
                        let a: [f64; 4] = v.as_slice().try_into().map_err(|_| anyhow::anyhow!("fit: rho0 needs 4 values, got {}", v.len()))?;
                        PopulationVector::new(a)?
                    }
                };
                let readout = parse_readout(self.readout.as_deref().unwrap_or("d21"))?;
                held.validate()?;
                FitModel::PumpDelta { rho0, readout, rates: held, free_rates: self.free_rates }
            }
            "linear" => FitModel::Linear,
            "sqrt_power" => FitModel::SqrtPower,
            other => bail!(
                "fit: unknown model `{other}` (expected rabi, fid, echo_stretched, t1_gamma, t1_alpha, pump_delta, linear or sqrt_power)"
            ),
        };
        Ok(model)
    }
}

#[derive(Debug, Serialize)]
pub struct FitDocument {
    pub model: FitModel,
    pub data: String,
    pub data_sha256: String,
    pub n_points: usize,
    pub initial: Vec<f64>,
    pub result: FitResult,
    pub git_describe: &'static str,
}

pub fn fit_file(opts: &FitOptions, data_path: &Path) -> anyhow::Result<FitDocument> {
    let model = opts.build()?;
    let bytes = std::fs::read(data_path).with_context(|| format!("fit: cannot read {}", data_path.display()))?;
    let data = read_dataset(data_path, opts.column.as_deref())?;
    let initial = match &opts.init {
        Some(p) => p.clone(),
        None => initial_guess(&model, &data)?,
    };
    let result = fit(&model, &data, &initial).with_context(|| format!("fit `{}`", model.id()))?;
    Ok(FitDocument {
        model,
        data: file_name(data_path),
        data_sha256: hex::encode(Sha256::digest(&bytes)),
        n_points: data.len(),
        initial,
        result,
        git_describe: GIT_DESCRIBE,
    })
}

pub fn cmd_fit(cfg: &RunConfig, opts: &FitOptions, data_path: &Path) -> anyhow::Result<(FitDocument, PathBuf)> {
    let doc = fit_file(opts, data_path)?;
    let path = path_for(&cfg.output, &format!("_fit_{}.json", doc.model.id()));
    write_json(&path, &doc)?;
    Ok((doc, path))
}
