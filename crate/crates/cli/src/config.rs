// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! JSON run configuration.

use std::path::Path;

use serde::Deserialize;

use tomolab_core::inversion::LambdaMethod;
use tomolab_core::model::{
    coefficients_from_lindblad, CumulantState, LindbladCoefficients, MasterEqCoefficients, PhysicalParams,
};
use tomolab_core::reconstruction::SignHints;
use tomolab_core::tomography::{Bandwidth, GridSpec, NoiseModel, TomographyLine, MIN_QUADRATURE_SAMPLES};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub physical: PhysicalParams,
    #[serde(default)]
    pub coefficients: Option<MasterEqCoefficients>,
    #[serde(default)]
    pub lindblad: Option<LindbladCoefficients>,
    pub initial_state: CumulantState,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub tomography: TomographySection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub estimation: EstimationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Measurement time for tomogram, reconstruct and roundtrip.
    #[serde(default = "default_t")]
    pub t: f64,
    /// Trajectory grid; defaults to 51 samples on `[0, t]`.
    #[serde(default)]
    pub grid: Option<Range>,
    /// RK4 step, used only when `ω = 0`.
    #[serde(default)]
    pub dt: Option<f64>,
}

fn default_t() -> f64 {
    1.0
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t: default_t(),
            grid: None,
            dt: None,
        }
    }
}

impl TimeSection {
    pub fn grid_values(&self) -> Vec<f64> {
        self.grid
            .unwrap_or(Range {
                start: 0.0,
                stop: self.t,
                count: 51,
            })
            .values()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRequest {
    pub mu: f64,
    pub nu: f64,
    #[serde(default)]
    pub xs: Vec<f64>,
    #[serde(default)]
    pub x_grid: Option<Range>,
}

impl LineRequest {
    pub fn positions(&self) -> Vec<f64> {
        let mut xs = self.xs.clone();
        if let Some(g) = self.x_grid {
            xs.extend(g.values());
        }
        xs
    }

    pub fn line(&self) -> Result<TomographyLine, CliError> {
        TomographyLine::new(self.mu, self.nu).map_err(|e| CliError::Config(format!("tomography line: {e}")))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    /// Explicit lines; empty means the default 8–10 point layout.
    #[serde(default)]
    pub lines: Vec<LineRequest>,
    #[serde(default)]
    pub sign_hints: SignHints,
    #[serde(default)]
    pub wigner: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Exact,
    Additive,
    QuadratureSamples,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(1)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub mode: NoiseMode,
    /// Additive noise levels; one sweep entry each.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Sample count for quadrature sampling.
    #[serde(default)]
    pub n: Option<usize>,
    /// Fixed KDE bandwidth; Silverman's rule when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub seeds: Seeds,
    /// Parallelism tolerance for the λ estimate (rad).
    #[serde(default)]
    pub angle_tol: Option<f64>,
    /// Relative gap accepted when intersecting noisy candidate spreads.
    #[serde(default)]
    pub match_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    #[default]
    FiniteTime,
    Stationary,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    #[serde(default)]
    pub mode: EstimationMode,
    #[serde(default)]
    pub lambda_method: LambdaMethod,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub trajectory: String,
    pub tomogram: String,
    pub wigner: String,
    pub wigner_meta: String,
    pub reconstruction: String,
    pub estimate: String,
    pub errors: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            tomogram: "tomogram.csv".into(),
            wigner: "wigner.csv".into(),
            wigner_meta: "wigner.json".into(),
            reconstruction: "reconstruction.json".into(),
            estimate: "estimate.json".into(),
            errors: "errors.csv".into(),
        }
    }
}

/// One noise level of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub sigma: f64,
    pub model: NoiseModel,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Config =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.coefficients.is_some() && self.lindblad.is_some() {
            return Err(CliError::Config("`coefficients` and `lindblad` are mutually exclusive".into()));
        }
        if !(self.time.t.is_finite() && self.time.t >= 0.0) {
            return Err(CliError::Config(format!("time.t must be non-negative, got {}", self.time.t)));
        }
        if let Some(g) = self.time.grid {
            if g.count == 0 || !(g.start >= 0.0 && g.stop >= g.start && g.stop.is_finite()) {
                return Err(CliError::Config("time.grid needs 0 <= start <= stop and count >= 1".into()));
            }
        }
        if let Some(dt) = self.time.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::Config(format!("time.dt must be positive, got {dt}")));
            }
        }
        for l in &self.tomography.lines {
            l.line()?;
            if l.positions().is_empty() {
                return Err(CliError::Config("every tomography line needs xs or x_grid".into()));
            }
        }
        if let Some(g) = self.tomography.wigner {
            if g.q_count == 0 || g.p_count == 0 || !(g.q_max >= g.q_min && g.p_max >= g.p_min) {
                return Err(CliError::Config("wigner grid needs non-empty increasing axes".into()));
            }
        }
        self.noise_levels()?;
        if let Seeds::List(l) = &self.noise.seeds {
            if l.is_empty() {
                return Err(CliError::Config("noise.seeds list is empty".into()));
            }
        }
        for (name, v) in [("angle_tol", self.noise.angle_tol), ("match_tol", self.noise.match_tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Config(format!("noise.{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth coefficients, from either representation.
    pub fn truth(&self) -> Result<MasterEqCoefficients, CliError> {
        match (self.coefficients, self.lindblad) {
            (Some(c), None) => Ok(c),
            (None, Some(l)) => coefficients_from_lindblad(&l, self.physical.hbar)
                .map_err(|e| CliError::Config(format!("lindblad: {e}"))),
            (None, None) => Err(CliError::Config("one of `coefficients` or `lindblad` is required".into())),
            (Some(_), Some(_)) => Err(CliError::Config("`coefficients` and `lindblad` are mutually exclusive".into())),
        }
    }

    pub fn noise_levels(&self) -> Result<Vec<NoiseLevel>, CliError> {
        let n = &self.noise;
        match n.mode {
            NoiseMode::Exact => Ok(vec![NoiseLevel {
                sigma: 0.0,
                model: NoiseModel::Exact,
            }]),
            NoiseMode::Additive => {
                if n.sigmas.is_empty() {
                    return Err(CliError::Config("additive noise needs `sigmas`".into()));
                }
                n.sigmas
                    .iter()
                    .map(|&sigma| {
                        if sigma.is_finite() && sigma >= 0.0 {
                            Ok(NoiseLevel {
                                sigma,
                                model: NoiseModel::Additive { sigma },
                            })
                        } else {
                            Err(CliError::Config(format!("noise sigma must be non-negative, got {sigma}")))
                        }
                    })
                    .collect()
            }
            NoiseMode::QuadratureSamples => {
                let samples = n.n.ok_or_else(|| CliError::Config("quadrature_samples needs `n`".into()))?;
                if samples < MIN_QUADRATURE_SAMPLES {
                    return Err(CliError::Config(format!(
                        "quadrature_samples needs n >= {MIN_QUADRATURE_SAMPLES}, got {samples}"
                    )));
                }
                let bandwidth = match n.bandwidth {
                    None => Bandwidth::Silverman,
                    Some(h) if h.is_finite() && h > 0.0 => Bandwidth::Fixed(h),
                    Some(h) => return Err(CliError::Config(format!("bandwidth must be positive, got {h}"))),
                };
                Ok(vec![NoiseLevel {
                    sigma: 0.0,
                    model: NoiseModel::QuadratureSamples { n: samples, bandwidth },
                }])
            }
        }
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.mode != NoiseMode::Exact
    }

    /// Seeds of a sweep, offset by `base`.
    pub fn seeds(&self, base: u64) -> Vec<u64> {
        match &self.noise.seeds {
            Seeds::Count(n) => (0..(*n).max(1)).map(|i| base.wrapping_add(i)).collect(),
            Seeds::List(l) => l.iter().map(|s| base.wrapping_add(*s)).collect(),
        }
    }
}
