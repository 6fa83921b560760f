// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Rate extraction chain: γ from the ν1 relaxation curve, α with γ held,
//! δ from the pumping transient with both rates held, then δ versus laser
//! intensity.

use std::path::PathBuf;

use anyhow::Context;
use odmr_core::experiments::{pump_scan, t1_alpha_scan, t1_gamma_scan, PrepId, ReadoutScheme};
use odmr_core::fitting::{fit, initial_guess, Dataset};
use odmr_core::{Curve, FitModel, FitResult, PopulationVector, RelaxationRates, SimConfig};
use serde::Serialize;

use crate::commands::{emit, Table, CSV_DIGITS};
use crate::config::RunConfig;
use crate::output::{path_for, write_json, GIT_DESCRIBE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    fn from_fit(r: &FitResult, name: &str) -> Self {
        Self { value: r.get(name).expect("parameter exists"), error: r.error(name).expect("parameter exists") }
    }

    /// 1000/value, i.e. a rate in ms⁻¹ turned into a time in µs.
    fn inverse_time(self) -> Self {
        Self { value: 1e3 / self.value, error: 1e3 * self.error / (self.value * self.value) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// W/cm².
    pub intensity: f64,
    pub delta: Estimate,
}

/// Fitted rates (ms⁻¹), times (µs) and the pump-rate slope (ms⁻¹ per W/cm²).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub gamma: Estimate,
    pub alpha: Estimate,
    pub delta: Estimate,
    pub alpha_over_gamma: Estimate,
    pub t1_gamma_us: Estimate,
    pub t1_alpha_us: Estimate,
    pub sweep: Vec<SweepPoint>,
    pub slope: Estimate,
    pub intercept: Estimate,
    pub config_hash: String,
    pub seed: u64,
    pub git_describe: &'static str,
}

struct Stage<'a> {
    cfg: &'a RunConfig,
    written: Vec<PathBuf>,
    stream: u64,
}

impl Stage<'_> {
    fn noisy(&mut self, c: Curve, scale: f64) -> anyhow::Result<Curve> {
        self.stream += 1;
        let sigma = self.cfg.pipeline.noise * self.cfg.readout.delta_contrast * scale;
        Ok(c.with_noise(sigma, self.cfg.seed.wrapping_add(self.stream))?)
    }

    fn fit(&mut self, model: &FitModel, c: &Curve, name: &str) -> anyhow::Result<FitResult> {
        let table = Table::from_curve(c).renamed(name);
        self.written.extend(emit(&table, self.cfg, &self.cfg.output, CSV_DIGITS)?);
        let data = Dataset::new(c.x.clone(), c.y.clone());
        let init = initial_guess(model, &data)?;
        Ok(fit(model, &data, &init)?)
    }

    fn delta(&mut self, sim: &SimConfig, rates: RelaxationRates, name: &str) -> anyhow::Result<Estimate> {
        let t = self.cfg.pipeline.pump_t.points("pipeline.pump_t")?;
        let scan = pump_scan(PrepId::Unpolarized, &t, &[ReadoutScheme::D21, ReadoutScheme::D34, ReadoutScheme::D24], sim)?;
        let curve = self.noisy(scan.differences[0].clone(), scan.scale)?;
        let model = FitModel::PumpDelta { rho0: PopulationVector::UNIFORM, readout: ReadoutScheme::D21, rates, free_rates: false };
        Ok(Estimate::from_fit(&self.fit(&model, &curve, name)?, "delta"))
    }
}

pub fn run_pipeline(cfg: &RunConfig) -> anyhow::Result<(PipelineSummary, Vec<PathBuf>)> {
    cfg.validate()?;
    let sim = cfg.sim();
    let mut st = Stage { cfg, written: Vec::new(), stream: 0 };
    let tau = cfg.pipeline.t1_tau.points("pipeline.t1_tau")?;

    let gamma = (|| {
        let c = st.noisy(t1_gamma_scan(&tau, ReadoutScheme::D21, &sim)?, 1.0)?;
        Ok::<_, anyhow::Error>(Estimate::from_fit(&st.fit(&FitModel::T1Gamma, &c, "pipeline_t1_gamma")?, "gamma"))
    })()
    .context("pipeline stage `t1_gamma`")?;

    let alpha = (|| {
        let c = st.noisy(t1_alpha_scan(&tau, &sim)?, 1.0)?;
        let model = FitModel::T1Alpha { gamma: Some(gamma.value) };
        Ok::<_, anyhow::Error>(Estimate::from_fit(&st.fit(&model, &c, "pipeline_t1_alpha")?, "alpha"))
    })()
    .context("pipeline stage `t1_alpha`")?;

    let rates = RelaxationRates { alpha: alpha.value, gamma: gamma.value };
    let delta = st.delta(&sim, rates, "pipeline_pump").context("pipeline stage `pump`")?;

    let mut sweep = Vec::new();
    for (k, &intensity) in cfg.pipeline.intensities.iter().enumerate() {
        let mut s = sim;
        s.pump.intensity = intensity;
        let d = st.delta(&s, rates, &format!("pipeline_sweep_{k}")).with_context(|| format!("pipeline stage `sweep` at intensity {intensity}"))?;
        sweep.push(SweepPoint { intensity, delta: d });
    }
    let line = {
        let data = Dataset::new(sweep.iter().map(|p| p.intensity).collect(), sweep.iter().map(|p| p.delta.value).collect());
        let init = initial_guess(&FitModel::Linear, &data)?;
        fit(&FitModel::Linear, &data, &init).context("pipeline stage `slope`")?
    };

    let ratio = alpha.value / gamma.value;
    let ratio_err = ratio * ((alpha.error / alpha.value).powi(2) + (gamma.error / gamma.value).powi(2)).sqrt();
    let summary = PipelineSummary {
        gamma,
        alpha,
        delta,
        alpha_over_gamma: Estimate { value: ratio, error: ratio_err },
        t1_gamma_us: gamma.inverse_time(),
        t1_alpha_us: alpha.inverse_time(),
        sweep,
        slope: Estimate::from_fit(&line, "slope"),
        intercept: Estimate::from_fit(&line, "intercept"),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        git_describe: GIT_DESCRIBE,
    };
    let path = path_for(&cfg.output, "_pipeline.json");
    write_json(&path, &summary)?;
    st.written.push(path);
    Ok((summary, st.written))
}
