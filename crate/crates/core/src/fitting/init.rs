// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use super::{Dataset, FitModel};
use crate::error::{invalid, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn span(x: &[f64]) -> f64 {
    x[x.len() - 1] - x[0]
}

/// Least-squares line through (x, y): (slope, intercept).
fn line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn dft_power(x: &[f64], y: &[f64], f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (t, v) in x.iter().zip(y) {
        let ph = 2.0 * PI * f * t;
        re += v * ph.cos();
        im -= v * ph.sin();
    }
    re * re + im * im
}

/// Frequency (cycles per x unit) of the largest discrete-Fourier peak.
fn dominant_frequency(x: &[f64], y: &[f64]) -> f64 {
    let m = mean(y);
    let centered: Vec<f64> = y.iter().map(|v| v - m).collect();
    let min_dx = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let f_lo = 0.5 / span(x);
    let f_hi = 0.5 / min_dx;
    let n = 4000;
    let step = (f_hi - f_lo) / n as f64;
    let mut best = (f_lo, 0.0);
    for i in 0..=n {
        let f = f_lo + i as f64 * step;
        let p = dft_power(x, &centered, f);
        if p > best.1 {
            best = (f, p);
        }
    }
    let (mut lo, mut hi) = ((best.0 - step).max(f_lo), best.0 + step);
    for _ in 0..60 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if dft_power(x, &centered, a) < dft_power(x, &centered, b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

/// Decay time from the RMS of the first and second halves of a centered trace.
fn envelope_time(x: &[f64], y: &[f64], offset: f64) -> f64 {
    let h = x.len() / 2;
    let rms = |r: std::ops::Range<usize>| (y[r.clone()].iter().map(|v| (v - offset).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
    let (r1, r2) = (rms(0..h), rms(h..x.len()));
    let (t1, t2) = (mean(&x[0..h]), mean(&x[h..]));
    if r1 > r2 && r2 > 0.0 {
        (t2 - t1) / (r1 / r2).ln()
    } else {
        span(x)
    }
}

fn grid_search(model: &FitModel, data: &Dataset, candidates: impl Iterator<Item = Vec<f64>>) -> Option<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for p in candidates {
        let Ok(f) = model.eval_unchecked(&p, &data.x) else { continue };
        let cost: f64 = f.iter().zip(&data.y).map(|(a, b)| (a - b).powi(2)).sum();
        if cost.is_finite() && best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, p));
        }
    }
    best.map(|(_, p)| p)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let r = (hi / lo).ln();
    (0..n).map(move |i| lo * (r * i as f64 / (n - 1) as f64).exp())
}

/// Best linear amplitude for fixed nonlinear parameters.
fn amplitude_for(model: &FitModel, data: &Dataset, p: &mut [f64]) {
    p[0] = 1.0;
    if let Ok(f) = model.eval_unchecked(p, &data.x) {
        let ff: f64 = f.iter().map(|v| v * v).sum();
        if ff > 0.0 {
            p[0] = f.iter().zip(&data.y).map(|(a, b)| a * b).sum::<f64>() / ff;
        }
    }
}

/// Heuristic starting values: Fourier peak for frequencies, log-linear or
/// coarse grid estimates for decay constants.
pub fn initial_guess(model: &FitModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.x.len() < 2 || data.x.len() != data.y.len() {
        return Err(invalid("fitting", "data", "need at least two points with matching x and y"));
    }
    if data.x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("fitting", "data", "x must be strictly increasing for initial guesses"));
    }
    let (x, y) = (&data.x[..], &data.y[..]);
    let floor = |v: f64| v.max(10.0 * super::POSITIVE_FLOOR);
    let guess = match *model {
        FitModel::Rabi => {
            let a = mean(y);
            let f = dominant_frequency(x, y) * 1e3;
            vec![a, y[0] - a, floor(f), 0.0, floor(envelope_time(x, y, a))]
        }
        FitModel::Fid => {
            let f = dominant_frequency(x, y) * 1e3;
            vec![y[0], floor(f), 0.0, floor(envelope_time(x, y, 0.0))]
        }
        FitModel::EchoStretched => {
            let a = y[0];
            let pts: Vec<(f64, f64)> = x
                .iter()
                .zip(y)
                .filter(|(t, v)| **t > 0.0 && a != 0.0 && (0.05..0.95).contains(&(**v / a)))
                .map(|(t, v)| (t.ln(), (-(v / a).ln()).ln()))
                .collect();
            let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            match line(&lx, &ly) {
                Some((n, c)) if n > 0.0 => {
                    let n = n.clamp(0.5, 4.0);
                    vec![a, floor((-c / n).exp()), n]
                }
                _ => vec![a, floor(0.5 * span(x)), 1.0],
            }
        }
        FitModel::T1Gamma => {
            let sign = if y[0] < 0.0 { -1.0 } else { 1.0 };
            let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, v)| **v * sign > 0.0).map(|(t, v)| (*t, (v * sign).ln())).collect();
            let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            match line(&lx, &ly) {
                Some((s, c)) if s < 0.0 => vec![2.0 * sign * c.exp(), floor(-s * 1e3)],
                _ => vec![2.0 * y[0], floor(1e3 / span(x))],
            }
        }
        FitModel::T1Alpha { gamma } => {
            let rates = log_grid(0.1, 1000.0, 60);
            let candidates: Vec<Vec<f64>> = match gamma {
                Some(_) => rates.map(|a| vec![0.0, a]).collect(),
                None => rates.clone().flat_map(|a| rates.clone().map(move |g| vec![0.0, a, g])).collect(),
            };
            let fitted = candidates.into_iter().map(|mut p| {
                amplitude_for(model, data, &mut p);
                p
            });
            grid_search(model, data, fitted).unwrap_or_else(|| vec![2.0 * y[0], 10.0])
        }
        FitModel::PumpDelta { rates, free_rates, .. } => {
            let deltas = log_grid(1e-2, 1e4, 120);
            let candidates = deltas.map(move |d| if free_rates { vec![d, rates.alpha.max(1e-3), rates.gamma.max(1e-3)] } else { vec![d] });
            grid_search(model, data, candidates).unwrap_or_else(|| vec![10.0])
        }
        FitModel::Linear => {
            let (s, c) = line(x, y).unwrap_or((0.0, mean(y)));
            vec![s, c]
        }
        FitModel::SqrtPower => {
            let xx: f64 = x.iter().map(|v| v * v).sum();
            let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            vec![if xx > 0.0 { xy / xx } else { 0.0 }]
        }
    };
    Ok(guess)
}
