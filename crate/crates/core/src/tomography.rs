// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Phase-space densities of Gaussian states and simulated tomograms.
//!
//! Tomography works in dimensionless coordinates: a [`Rescaling`] maps
//! physical `(q, p)` to `(q̃, p̃)` with `q̃ p̃` dimensionless, so that the line
//! `X = μ q̃ + ν p̃` makes sense. A tomogram `ϖ(X, μ, ν)` of a Gaussian state
//! is a one-dimensional Gaussian in `X` with mean `μ⟨q⟩ + ν⟨p⟩` and variance
//! `μ²Δq² + ν²Δp² + 2μνσ`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CumulantState, PhysicalParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TomographyError {
    #[error("tomography line (mu, nu) = (0, 0) is degenerate")]
    DegenerateLine,
    #[error("omega = 0 needs the initial momentum variance to define a fictitious frequency")]
    MissingFallback,
    #[error("{name} = {value} must be positive and finite")]
    NonPositive { name: &'static str, value: f64 },
    #[error("state determinant {0:e} must be positive")]
    NonPositiveDeterminant(f64),
    #[error("line variance {0:e} must be positive")]
    NonPositiveLineVariance(f64),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("no sample positions requested")]
    EmptyPositions,
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, TomographyError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(TomographyError::NonPositive { name, value })
    }
}

/// Scale factors applied to `q` and `p`; their product is `1/ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub scale_q: f64,
    pub scale_p: f64,
}

impl Rescaling {
    pub const IDENTITY: Rescaling = Rescaling {
        scale_q: 1.0,
        scale_p: 1.0,
    };
}

/// Oscillator rescaling `q → √(mω/ħ) q`, `p → p/√(ħmω)` when `ω > 0`.
///
/// For `ω = 0` the fictitious frequency `ħω̄ = Δp₀²/2m` is used, which gives
/// `q → Δp₀ q/(√2 ħ)` and `p → p/(√2 Δp₀)`.
pub fn make_rescaling(p: &PhysicalParams, fallback_var_p0: Option<f64>) -> Result<Rescaling, TomographyError> {
    if p.omega > 0.0 {
        let mw = p.m * p.omega;
        return Ok(Rescaling {
            scale_q: (mw / p.hbar).sqrt(),
            scale_p: 1.0 / (p.hbar * mw).sqrt(),
        });
    }
    let var_p0 = require_positive("fallback_var_p0", fallback_var_p0.ok_or(TomographyError::MissingFallback)?)?;
    let dp0 = var_p0.sqrt();
    Ok(Rescaling {
        scale_q: dp0 / (std::f64::consts::SQRT_2 * p.hbar),
        scale_p: 1.0 / (std::f64::consts::SQRT_2 * dp0),
    })
}

/// Applies a rescaling to all five cumulants.
pub fn rescale_state(s: &CumulantState, r: &Rescaling) -> CumulantState {
    CumulantState {
        mean_q: r.scale_q * s.mean_q,
        mean_p: r.scale_p * s.mean_p,
        var_q: r.scale_q * r.scale_q * s.var_q,
        var_p: r.scale_p * r.scale_p * s.var_p,
        cov_qp: r.scale_q * r.scale_p * s.cov_qp,
    }
}

/// Inverse of [`rescale_state`].
pub fn unscale_state(s: &CumulantState, r: &Rescaling) -> CumulantState {
    rescale_state(
        s,
        &Rescaling {
            scale_q: 1.0 / r.scale_q,
            scale_p: 1.0 / r.scale_p,
        },
    )
}

/// Direction `(μ, ν)` of the phase-space line `X = μq + νp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyLine {
    pub mu: f64,
    pub nu: f64,
}

impl TomographyLine {
    pub const POSITION: TomographyLine = TomographyLine { mu: 1.0, nu: 0.0 };
    pub const MOMENTUM: TomographyLine = TomographyLine { mu: 0.0, nu: 1.0 };
    pub const DIAGONAL: TomographyLine = TomographyLine {
        mu: std::f64::consts::FRAC_1_SQRT_2,
        nu: std::f64::consts::FRAC_1_SQRT_2,
    };

    pub fn new(mu: f64, nu: f64) -> Result<Self, TomographyError> {
        if !(mu.is_finite() && nu.is_finite()) || (mu == 0.0 && nu == 0.0) {
            return Err(TomographyError::DegenerateLine);
        }
        Ok(Self { mu, nu })
    }

    pub fn radius(&self) -> f64 {
        self.mu.hypot(self.nu)
    }

    /// Unit-radius direction; `(X, μ, ν)` maps to `(X/r, μ/r, ν/r)` with density scaled by `r`.
    pub fn normalized(&self) -> TomographyLine {
        let r = self.radius();
        TomographyLine {
            mu: self.mu / r,
            nu: self.nu / r,
        }
    }

    /// Whether two lines describe the same direction up to positive scaling.
    pub fn same_direction(&self, other: &TomographyLine, tol: f64) -> bool {
        let a = self.normalized();
        let b = other.normalized();
        (a.mu - b.mu).abs() <= tol && (a.nu - b.nu).abs() <= tol
    }

    pub fn line_mean(&self, s: &CumulantState) -> f64 {
        self.mu * s.mean_q + self.nu * s.mean_p
    }

    pub fn line_variance(&self, s: &CumulantState) -> f64 {
        self.mu * self.mu * s.var_q + self.nu * self.nu * s.var_p + 2.0 * self.mu * self.nu * s.cov_qp
    }
}

/// One measured (or simulated) tomogram value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomogramPoint {
    pub x: f64,
    pub line: TomographyLine,
    pub value: f64,
    /// Standard deviation of the measurement noise; 0 for exact values.
    pub noise_sigma: f64,
}

impl TomogramPoint {
    pub fn exact(x: f64, line: TomographyLine, value: f64) -> Self {
        Self {
            x,
            line,
            value,
            noise_sigma: 0.0,
        }
    }

    /// The same measurement expressed on the unit-radius line.
    pub fn normalized(&self) -> TomogramPoint {
        let r = self.line.radius();
        TomogramPoint {
            x: self.x / r,
            line: self.line.normalized(),
            value: self.value * r,
            noise_sigma: self.noise_sigma * r,
        }
    }
}

/// Gaussian Wigner function of a (rescaled) state.
pub fn wigner(s: &CumulantState, q: f64, p: f64) -> Result<f64, TomographyError> {
    let det = s.det();
    if !(det > 0.0) {
        return Err(TomographyError::NonPositiveDeterminant(det));
    }
    let dq = q - s.mean_q;
    let dp = p - s.mean_p;
    let form = s.var_q * dp * dp + s.var_p * dq * dq - 2.0 * s.cov_qp * dq * dp;
    Ok((-form / (2.0 * det)).exp() / (2.0 * PI * det.sqrt()))
}

/// Peak value `1/(2π√det)` of the Wigner function.
pub fn wigner_peak(s: &CumulantState) -> Result<f64, TomographyError> {
    wigner(s, s.mean_q, s.mean_p)
}

/// Gaussian Radon transform `ϖ(x, μ, ν)`.
pub fn radon_gaussian(s: &CumulantState, x: f64, line: &TomographyLine) -> Result<f64, TomographyError> {
    let r = line.radius();
    if !(r > 0.0) {
        return Err(TomographyError::DegenerateLine);
    }
    let unit = line.normalized();
    let xu = x / r;
    let v = unit.line_variance(s);
    if !(v > 0.0) {
        return Err(TomographyError::NonPositiveLineVariance(v));
    }
    let d = xu - unit.line_mean(s);
    Ok((-d * d / (2.0 * v)).exp() / ((2.0 * PI * v).sqrt() * r))
}

/// Kernel bandwidth choice for density estimation from samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `h = σ̂ (4 / 3n)^{1/5}`
    Silverman,
    Fixed(f64),
}

/// How simulated tomogram values are corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseModel {
    Exact,
    /// Exact value plus `N(0, σ²)`, clamped at zero.
    Additive { sigma: f64 },
    /// Kernel density estimate from `n` draws of the quadrature.
    QuadratureSamples { n: usize, bandwidth: Bandwidth },
}

/// Smallest sample count accepted by [`NoiseModel::QuadratureSamples`].
pub const MIN_QUADRATURE_SAMPLES: usize = 100;

pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt() * (4.0 / (3.0 * n)).powf(0.2)
}

/// Gaussian-kernel density estimate at `x`.
pub fn kde_at(samples: &[f64], bandwidth: f64, x: f64) -> f64 {
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth * samples.len() as f64);
    norm * samples
        .iter()
        .map(|xi| {
            let u = (x - xi) / bandwidth;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
}

/// Simulates tomogram values of `s` on `line` at positions `xs`.
///
/// Deterministic for a given `seed`.
pub fn sample_tomogram(
    s: &CumulantState,
    line: &TomographyLine,
    xs: &[f64],
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<TomogramPoint>, TomographyError> {
    if xs.is_empty() {
        return Err(TomographyError::EmptyPositions);
    }
    let exact = xs
        .iter()
        .map(|&x| radon_gaussian(s, x, line).map(|v| TomogramPoint::exact(x, *line, v)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *noise {
        NoiseModel::Exact => Ok(exact),
        NoiseModel::Additive { sigma } => {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(TomographyError::InvalidNoise(format!("additive sigma = {sigma}")));
            }
            if sigma == 0.0 {
                return Ok(exact);
            }
            let dist = Normal::new(0.0, sigma).map_err(|e| TomographyError::InvalidNoise(e.to_string()))?;
            Ok(exact
                .into_iter()
                .map(|pt| TomogramPoint {
                    value: (pt.value + dist.sample(&mut rng)).max(0.0),
                    noise_sigma: sigma,
                    ..pt
                })
                .collect())
        }
        NoiseModel::QuadratureSamples { n, bandwidth } => {
            if n < MIN_QUADRATURE_SAMPLES {
                return Err(TomographyError::InvalidNoise(format!(
                    "need at least {MIN_QUADRATURE_SAMPLES} samples, got {n}"
                )));
            }
            if let Bandwidth::Fixed(h) = bandwidth {
                if !(h.is_finite() && h > 0.0) {
                    return Err(TomographyError::InvalidNoise(format!("bandwidth = {h}")));
                }
            }
            let r = line.radius();
            let unit = line.normalized();
            let v = unit.line_variance(s);
            if !(v > 0.0) {
                return Err(TomographyError::NonPositiveLineVariance(v));
            }
            // Draw the unit-line quadrature, then map back to the requested scale.
            let dist = Normal::new(r * unit.line_mean(s), r * v.sqrt())
                .map_err(|e| TomographyError::InvalidNoise(e.to_string()))?;
            let samples: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let h = match bandwidth {
                Bandwidth::Silverman => silverman_bandwidth(&samples),
                Bandwidth::Fixed(h) => h,
            };
            Ok(exact
                .into_iter()
                .map(|pt| {
                    let est = kde_at(&samples, h, pt.x);
                    TomogramPoint {
                        value: est,
                        // binomial-style standard error of the estimate
                        noise_sigma: (est / (n as f64 * h * 2.0 * PI.sqrt())).sqrt(),
                        ..pt
                    }
                })
                .collect())
        }
    }
}

/// Rectangular phase-space grid for Wigner plots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub q_count: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_count: usize,
}

impl GridSpec {
    fn axis(min: f64, max: f64, count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![min],
            _ => (0..count)
                .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }

    pub fn q_axis(&self) -> Vec<f64> {
        Self::axis(self.q_min, self.q_max, self.q_count)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        Self::axis(self.p_min, self.p_max, self.p_count)
    }
}

/// Evaluates the Wigner function row-major: `q` outer, `p` inner.
pub fn wigner_grid(s: &CumulantState, grid: &GridSpec) -> Result<Vec<(f64, f64, f64)>, TomographyError> {
    if grid.q_count == 0 || grid.p_count == 0 {
        return Err(TomographyError::EmptyPositions);
    }
    let ps = grid.p_axis();
    let mut out = Vec::with_capacity(grid.q_count * grid.p_count);
    for q in grid.q_axis() {
        for &p in &ps {
            out.push((q, p, wigner(s, q, p)?));
        }
    }
    Ok(out)
}
