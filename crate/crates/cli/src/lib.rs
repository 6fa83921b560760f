// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end of the ODMR simulator: reads a TOML run
//! configuration, dispatches simulations and fits, and writes CSV tables
//! with JSON sidecars under an output prefix.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{FitDocument, FitOptions, Table};
pub use config::{Experiment, Grid, RunConfig};
pub use pipeline::{run_pipeline, PipelineSummary};

#[derive(Debug, Parser)]
#[command(name = "odmr", version, about = "Spin-3/2 ODMR simulator and fitter")]
pub struct Cli {
    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the configured output prefix.
    #[arg(long, global = true, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy levels and transition frequencies versus field.
    Levels,
    /// Run the configured experiment.
    Simulate,
    /// Fit a model to a CSV curve table (`x,y[,sigma]` or `--column`).
    Fit(FitArgs),
    /// Extract γ, α and δ and the pump-rate slope from simulated scans.
    Pipeline,
    /// cw or double-resonance spectrum.
    Spectrum {
        /// Frequency of the fixed second source, MHz.
        #[arg(long, value_name = "MHZ")]
        pump_at: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// rabi, fid, echo_stretched, t1_gamma, t1_alpha, pump_delta, linear or sqrt_power.
    #[arg(long)]
    pub model: String,
    pub data: PathBuf,
    /// γ held fixed (t1_alpha, pump_delta), ms⁻¹.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// α held fixed (pump_delta), ms⁻¹.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Initial populations for pump_delta, four comma-separated values.
    #[arg(long, value_delimiter = ',')]
    pub rho0: Option<Vec<f64>>,
    /// Readout scheme for pump_delta.
    #[arg(long)]
    pub readout: Option<String>,
    /// Fit α and γ together with δ (pump_delta).
    #[arg(long)]
    pub free_rates: bool,
    /// Starting parameters; heuristic guess when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Column holding the data, e.g. `d21` of a pump table; the first
    /// column is then the abscissa.
    #[arg(long)]
    pub column: Option<String>,
}

impl From<&FitArgs> for FitOptions {
    fn from(a: &FitArgs) -> Self {
        Self {
            model: a.model.clone(),
            gamma: a.gamma,
            alpha: a.alpha,
            rho0: a.rho0.clone(),
            readout: a.readout.clone(),
            free_rates: a.free_rates,
            init: a.init.clone(),
            column: a.column.clone(),
        }
    }
}

/// Config file plus command-line overrides, validated.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sig(v: f64) -> String {
    output::fmt_sig(v, 6)
}

/// Executes the command; returns the human-readable report.
pub fn run(cli: &Cli) -> anyhow::Result<String> {
    let cfg = resolve_config(cli)?;
    let work = || -> anyhow::Result<String> {
        let list = |paths: Vec<PathBuf>| paths.iter().map(|p| format!("wrote {}\n", p.display())).collect::<String>();
        match &cli.command {
            Command::Levels => Ok(list(commands::cmd_levels(&cfg)?)),
            Command::Simulate => Ok(list(commands::cmd_simulate(&cfg)?)),
            Command::Spectrum { pump_at } => Ok(list(commands::cmd_spectrum(&cfg, *pump_at)?)),
            Command::Fit(args) => {
                let (doc, path) = commands::cmd_fit(&cfg, &args.into(), &args.data)?;
                let mut out = String::new();
                for ((n, v), e) in doc.result.names.iter().zip(&doc.result.params).zip(&doc.result.std_errors) {
                    out.push_str(&format!("{n} = {} ± {}\n", sig(*v), sig(*e)));
                }
                out.push_str(&format!(
                    "residual {} after {} iterations, converged: {}\nwrote {}\n",
                    sig(doc.result.residual_norm),
                    doc.result.n_iterations,
                    doc.result.converged,
                    path.display()
                ));
                Ok(out)
            }
            Command::Pipeline => {
                let (s, paths) = run_pipeline(&cfg)?;
                Ok(format!(
                    "gamma = {} ± {} /ms\nalpha = {} ± {} /ms\ndelta = {} ± {} /ms\nalpha/gamma = {}\nslope = {} ± {} /ms per W/cm²\n{}",
                    sig(s.gamma.value),
                    sig(s.gamma.error),
                    sig(s.alpha.value),
                    sig(s.alpha.error),
                    sig(s.delta.value),
                    sig(s.delta.error),
                    sig(s.alpha_over_gamma.value),
                    sig(s.slope.value),
                    sig(s.slope.error),
                    list(paths)
                ))
            }
        }
    };
    match cli.threads {
        Some(0) => anyhow::bail!("cli: --threads must be >= 1"),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    }
}
