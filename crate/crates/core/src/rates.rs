// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Four-level population dynamics under spin-lattice relaxation and optical
//! pumping.
//!
//! Rates are in ms⁻¹ and times at the public interface in µs. Generators are
//! stored with the global factor 1/2 already applied, so the eigenvalues
//! returned here are the eigenvalues of the generator itself.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const US_TO_MS: f64 = 1e-3;

/// Default pump-rate slope, ms⁻¹ per W/cm².
pub const DEFAULT_PUMP_SLOPE: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationRates {
    /// |+1/2> <-> |-1/2> equilibration rate, ms⁻¹.
    pub alpha: f64,
    /// |±3/2> <-> |±1/2> equilibration rate, ms⁻¹.
    pub gamma: f64,
}

impl Default for RelaxationRates {
    fn default() -> Self {
        Self { alpha: 9.3, gamma: 6.8 }
    }
}

impl RelaxationRates {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        let r = Self { alpha, gamma };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("rate-dynamics", "alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("rate-dynamics", "gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    /// ξ = √(α² + γ²)
    pub fn xi(&self) -> f64 {
        self.alpha.hypot(self.gamma)
    }

    /// α − ξ evaluated without cancellation.
    fn alpha_minus_xi(&self) -> f64 {
        let xi = self.xi();
        if xi == 0.0 {
            0.0
        } else {
            -self.gamma * self.gamma / (self.alpha + xi)
        }
    }
}

/// Optical pumping rate δ from |±3/2> into |±1/2>, ms⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PumpRate(pub f64);

impl PumpRate {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(invalid("rate-dynamics", "delta", format!("must be >= 0, got {delta}")));
        }
        Ok(Self(delta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Level populations (ρ11, ρ22, ρ33, ρ44) for m = +3/2, +1/2, −1/2, −3/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector(pub [f64; 4]);

impl PopulationVector {
    pub const UNIFORM: Self = Self([0.25; 4]);

    /// Validated constructor: entries in [0, 1] and unit sum, both within 1e-9.
    pub fn new(rho: [f64; 4]) -> Result<Self> {
        if rho.iter().any(|p| !p.is_finite() || *p < -1e-9 || *p > 1.0 + 1e-9) {
            return Err(invalid("rate-dynamics", "rho", format!("entries must lie in [0, 1], got {rho:?}")));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid("rate-dynamics", "rho", format!("entries must sum to 1, got {sum}")));
        }
        Ok(Self(rho))
    }

    /// Wraps a propagated vector without validation; small negative entries
    /// from round-off are kept as is.
    pub fn new_unchecked(rho: [f64; 4]) -> Self {
        Self(rho)
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self([v[0], v[1], v[2], v[3]])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for PopulationVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Total-ensemble populations with a spin-polarized fraction `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePolarization {
    pub p: f64,
    pub sigma: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    /// Closed form was singular; the matrix-exponential oracle was used.
    MatrixExponential,
    NumericalEigen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub populations: PopulationVector,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    /// Eigenvalues, ms⁻¹.
    pub values: [f64; 4],
    /// Unnormalized eigenvectors in the same order.
    pub vectors: [Vector4<f64>; 4],
    pub method: Method,
}

/// Relaxation generator (ms⁻¹); columns sum to zero.
pub fn relaxation_generator(r: &RelaxationRates) -> Matrix4<f64> {
    let (a, g) = (r.alpha, r.gamma);
    #[rustfmt::skip]
    let m = Matrix4::new(
        -g,  g,       0.0,     0.0,
         g, -a - g,   a,       0.0,
        0.0, a,      -a - g,   g,
        0.0, 0.0,     g,      -g,
    );
    m * 0.5
}

pub fn relax_eigenvalues(r: &RelaxationRates) -> [f64; 4] {
    let (a, g, xi) = (r.alpha, r.gamma, r.xi());
    [0.0, -g, -(a + g + xi) / 2.0, -(a + g - xi) / 2.0]
}

/// Closed-form eigensystem of the relaxation generator. The degenerate
/// α = γ = 0 case is returned as is (zero vectors included).
pub fn relax_eigensystem(r: &RelaxationRates) -> Eigensystem {
    let (a, g, xi) = (r.alpha, r.gamma, r.xi());
    Eigensystem {
        values: relax_eigenvalues(r),
        vectors: [
            Vector4::new(1.0, 1.0, 1.0, 1.0),
            Vector4::new(1.0, -1.0, -1.0, 1.0),
            Vector4::new(-g, a + xi, -a - xi, g),
            Vector4::new(-g, r.alpha_minus_xi(), -r.alpha_minus_xi(), g),
        ],
        method: Method::ClosedForm,
    }
}

/// Expansion weights c1..c4 of `rho0` in the relaxation eigenbasis.
pub fn relax_weights(rho0: &PopulationVector, r: &RelaxationRates) -> Result<[f64; 4]> {
    let (g, xi) = (r.gamma, r.xi());
    if g == 0.0 || xi == 0.0 {
        return Err(Error::SingularDecomposition("relaxation weights need gamma > 0"));
    }
    let [a, b, c, d] = rho0.0;
    let a_m_xi = r.alpha_minus_xi();
    let a_p_xi = r.alpha + xi;
    Ok([
        1.0,
        a - b - c + d,
        ((a - d) * a_m_xi + g * (b - c)) / (g * xi),
        -((a - d) * a_p_xi + g * (b - c)) / (g * xi),
    ])
}

/// Populations after relaxing for `t_us` microseconds.
pub fn relax_propagate(rho0: &PopulationVector, t_us: f64, r: &RelaxationRates) -> Result<Propagation> {
    check_time(t_us)?;
    let weights = match relax_weights(rho0, r) {
        Ok(w) => w,
        Err(_) => return oracle_fallback(&relaxation_generator(r), rho0, t_us),
    };
    let sys = relax_eigensystem(r);
    let t = t_us * US_TO_MS;
    let mut acc = Vector4::zeros();
    for k in 0..4 {
        acc += sys.vectors[k] * (weights[k] * (sys.values[k] * t).exp());
    }
    Ok(Propagation {
        populations: PopulationVector::from_vector(&(acc * 0.25)),
        method: Method::ClosedForm,
    })
}

/// ρ22 − ρ33 after relaxing from (½, ½, 0, 0).
pub fn rho22_minus_rho33(t_us: f64, r: &RelaxationRates) -> Result<f64> {
    check_time(t_us)?;
    let (g, xi) = (r.gamma, r.xi());
    if g == 0.0 {
        return Err(Error::SingularDecomposition("rho22 - rho33 closed form needs gamma > 0"));
    }
    let [_, _, l3, l4] = relax_eigenvalues(r);
    let t = t_us * US_TO_MS;
    Ok((l3 * r.alpha_minus_xi() * (l4 * t).exp() - l4 * (r.alpha + xi) * (l3 * t).exp()) / (2.0 * g * xi))
}

/// Closed-form relaxation from (½, ½, 0, 0), component by component.
pub fn relax_from_upper_pair(t_us: f64, r: &RelaxationRates) -> Result<PopulationVector> {
    let (a, g, xi) = (r.alpha, r.gamma, r.xi());
    if g == 0.0 {
        return Err(Error::SingularDecomposition("closed form needs gamma > 0"));
    }
    let [_, _, l3, l4] = relax_eigenvalues(r);
    let t = t_us * US_TO_MS;
    let (e3, e4) = ((l3 * t).exp(), (l4 * t).exp());
    let amx = r.alpha_minus_xi();
    Ok(PopulationVector([
        (l3 * e4 + l4 * e3 + xi) / (4.0 * xi),
        (l3 * amx * e4 - l4 * (a + xi) * e3 + g * xi) / (4.0 * g * xi),
        (-l3 * amx * e4 + l4 * (a + xi) * e3 + g * xi) / (4.0 * g * xi),
        (-l3 * e4 + l4 * e3 + xi) / (4.0 * xi),
    ]))
}

/// Generator with optical pumping at rate δ (ms⁻¹); columns sum to zero.
pub fn pump_generator(r: &RelaxationRates, d: PumpRate) -> Matrix4<f64> {
    let (a, g, p) = (r.alpha, r.gamma, d.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        -g - 2.0 * p, g,          0.0,        0.0,
         g + p,      -a - g - p,  a + p,      p,
         p,           a + p,     -a - g - p,  g + p,
        0.0,          0.0,        g,         -g - 2.0 * p,
    );
    m * 0.5
}

pub fn pump_eigenvalues(r: &RelaxationRates, d: PumpRate) -> [f64; 4] {
    let (a, g, xi, p) = (r.alpha, r.gamma, r.xi(), d.0);
    [0.0, -g - p, -(a + g + xi) / 2.0 - p, -(a + g - xi) / 2.0 - p]
}

fn pump_closed_vectors(r: &RelaxationRates, d: PumpRate) -> Option<[Vector4<f64>; 4]> {
    let (a, g, xi, p) = (r.alpha, r.gamma, r.xi(), d.0);
    if g == 0.0 {
        return None;
    }
    let amx = r.alpha_minus_xi();
    let v1 = (g + 2.0 * p) / g;
    let v3 = (a * a + xi * (p + a) + p * (a - g)) / (a * g + p * (a + g - xi));
    let v4 = (a * a - xi * (p + a) + p * (a - g)) / (a * g + p * (a + g + xi));
    let vectors = [
        Vector4::new(1.0, v1, v1, 1.0),
        Vector4::new(1.0, -1.0, -1.0, 1.0),
        Vector4::new(-1.0, v3, -(a + xi) / g, 1.0),
        Vector4::new(-1.0, v4, -amx / g, 1.0),
    ];
    vectors.iter().all(|v| v.iter().all(|x| x.is_finite())).then_some(vectors)
}

/// Eigensystem of the pumping generator. The closed form needs γ > 0;
/// otherwise eigenvectors come from a numerical null-space computation.
pub fn pump_eigensystem(r: &RelaxationRates, d: PumpRate) -> Eigensystem {
    let values = pump_eigenvalues(r, d);
    match pump_closed_vectors(r, d) {
        Some(vectors) => Eigensystem { values, vectors, method: Method::ClosedForm },
        None => numerical_eigensystem(&pump_generator(r, d), values),
    }
}

/// Eigenvectors for known real eigenvalues via the SVD null space of
/// (G − λI). Repeated eigenvalues share one null-space basis.
pub fn numerical_eigensystem(generator: &Matrix4<f64>, values: [f64; 4]) -> Eigensystem {
    let scale = generator.abs().max().max(1.0);
    let mut vectors = [Vector4::zeros(); 4];
    let mut done = [false; 4];
    for i in 0..4 {
        if done[i] {
            continue;
        }
        let cluster: Vec<usize> = (i..4)
            .filter(|&j| !done[j] && (values[j] - values[i]).abs() <= 1e-9 * scale)
            .collect();
        let shifted = generator - Matrix4::identity() * values[i];
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        for (slot, &j) in cluster.iter().enumerate() {
            let row = v_t.row(order[slot]).transpose();
            vectors[j] = Vector4::new(row[0], row[1], row[2], row[3]);
            done[j] = true;
        }
    }
    Eigensystem { values, vectors, method: Method::NumericalEigen }
}

/// Expansion weights p1..p4 of `rho0` in the pumping eigenbasis.
pub fn pump_weights(rho0: &PopulationVector, r: &RelaxationRates, d: PumpRate) -> Result<[f64; 4]> {
    let (alpha, g, xi, p) = (r.alpha, r.gamma, r.xi(), d.0);
    if g + p == 0.0 || xi == 0.0 {
        return Err(Error::SingularDecomposition("pump weights need gamma + delta > 0 and xi > 0"));
    }
    let [a, b, c, dd] = rho0.0;
    let xma = -r.alpha_minus_xi();
    Ok([
        g / (g + p),
        (g * (a - b - c + dd) + 2.0 * p * (a + dd)) / (g + p),
        (g * (b - c) - xma * (a - dd)) / xi,
        (g * (c - b) - (xi + alpha) * (a - dd)) / xi,
    ])
}

/// Populations after `t_us` microseconds of optical pumping.
pub fn pump_propagate(rho0: &PopulationVector, t_us: f64, r: &RelaxationRates, d: PumpRate) -> Result<Propagation> {
    check_time(t_us)?;
    let closed = pump_weights(rho0, r, d)
        .ok()
        .zip(pump_closed_vectors(r, d));
    let Some((weights, vectors)) = closed else {
        return oracle_fallback(&pump_generator(r, d), rho0, t_us);
    };
    let values = pump_eigenvalues(r, d);
    let t = t_us * US_TO_MS;
    let mut acc = Vector4::zeros();
    for k in 0..4 {
        acc += vectors[k] * (weights[k] * (values[k] * t).exp());
    }
    Ok(Propagation {
        populations: PopulationVector::from_vector(&(acc * 0.25)),
        method: Method::ClosedForm,
    })
}

/// Closed-form pumping from the unpolarized state.
pub fn pump_from_uniform(t_us: f64, r: &RelaxationRates, d: PumpRate) -> Result<PopulationVector> {
    let (g, p) = (r.gamma, d.0);
    let l2 = -(g + p);
    if l2 == 0.0 {
        return Err(Error::SingularDecomposition("closed form needs gamma + delta > 0"));
    }
    let e = (l2 * t_us * US_TO_MS).exp();
    let outer = -(g + p * e) / (4.0 * l2);
    let inner = -(g + 2.0 * p - p * e) / (4.0 * l2);
    Ok(PopulationVector([outer, inner, inner, outer]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationary {
    pub state: PopulationVector,
    /// Set when γ = δ = 0 and every distribution is stationary.
    pub degenerate: bool,
}

pub fn stationary_state(r: &RelaxationRates, d: PumpRate) -> Stationary {
    let (g, p) = (r.gamma, d.0);
    if g + p == 0.0 {
        return Stationary { state: PopulationVector::UNIFORM, degenerate: true };
    }
    let outer = g / (4.0 * (g + p));
    let inner = outer + p / (2.0 * (g + p));
    Stationary {
        state: PopulationVector([outer, inner, inner, outer]),
        degenerate: false,
    }
}

/// exp(G·t)·ρ0 by scaling and squaring of a truncated Taylor series.
///
/// `generator` is in ms⁻¹ and `t_us` in µs. Independent of the closed-form
/// eigen-decompositions, so it serves as their cross-check.
pub fn expm_oracle(generator: &Matrix4<f64>, rho0: &PopulationVector, t_us: f64) -> Result<PopulationVector> {
    check_time(t_us)?;
    let scale = generator.abs().max().max(1.0);
    let worst = (0..4).map(|j| generator.column(j).sum().abs()).fold(0.0, f64::max);
    if worst > 1e-9 * scale || generator.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonConservative(worst));
    }
    let prop = expm(&(generator * (t_us * US_TO_MS)));
    Ok(PopulationVector::from_vector(&(prop * rho0.to_vector())))
}

pub(crate) fn expm(a: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = (0..4).map(|j| a.column(j).abs().sum()).fold(0.0, f64::max);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(squarings);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..=20 {
        term = term * b / k as f64;
        sum += term;
        if term.abs().max() < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

fn oracle_fallback(generator: &Matrix4<f64>, rho0: &PopulationVector, t_us: f64) -> Result<Propagation> {
    Ok(Propagation {
        populations: expm_oracle(generator, rho0, t_us)?,
        method: Method::MatrixExponential,
    })
}

/// δ = slope · intensity, with intensity in W/cm² and slope in ms⁻¹/(W/cm²).
pub fn intensity_to_delta(intensity: f64, slope: f64) -> Result<PumpRate> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(invalid("rate-dynamics", "intensity", format!("must be >= 0, got {intensity}")));
    }
    if !(slope >= 0.0 && slope.is_finite()) {
        return Err(invalid("rate-dynamics", "pump_slope", format!("must be >= 0, got {slope}")));
    }
    Ok(PumpRate(slope * intensity))
}

/// σ = (1 − P)/4 · (1,1,1,1) + P · ρ
pub fn subensemble_embed(rho: &PopulationVector, p: f64) -> Result<EnsemblePolarization> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("rate-dynamics", "polarization", format!("must lie in [0, 1], got {p}")));
    }
    let base = (1.0 - p) / 4.0;
    Ok(EnsemblePolarization {
        p,
        sigma: rho.0.map(|x| base + p * x),
    })
}

fn check_time(t_us: f64) -> Result<()> {
    if !(t_us >= 0.0 && t_us.is_finite()) {
        return Err(invalid("rate-dynamics", "t", format!("time must be >= 0, got {t_us}")));
    }
    Ok(())
}
