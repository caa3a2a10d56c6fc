// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Cumulants of a Gaussian state from a handful of tomogram values.
//!
//! On a marginal line the tomogram value at `X = 0` ties the mean to the
//! spread: `⟨X⟩ = ±Δ √(2 ln(1/(ϖ(0)Δ√2π)))`. Substituting that into the
//! value at some other `X` leaves a transcendental equation in `Δ` alone,
//! which generally has two roots. A second off-origin point has its own pair
//! of roots and only the true spread is common to both. If the sign of the
//! mean is not known, both signs are tried and a third off-origin point
//! decides between them.
//!
//! The covariance then follows from two values on a mixed line, e.g.
//! `(1/√2, 1/√2)`, whose mean is already fixed by the marginals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CumulantState, ModelError};
use crate::special::{lambert_w, LambertBranch};
use crate::tomography::{radon_gaussian, sample_tomogram, NoiseModel, TomogramPoint, TomographyError, TomographyLine};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructionError {
    #[error("origin density {w0:e} exceeds the largest value {bound:e} allowed for spread {spread}")]
    OriginDensityOutOfRange { w0: f64, bound: f64, spread: f64 },
    #[error("point {index} has invalid density {value}")]
    InvalidDensity { index: usize, value: f64 },
    #[error("invalid point set: {0}")]
    InvalidPoints(String),
    #[error("no spread is consistent with the point at x = {x} for the assumed sign")]
    NoRoot { x: f64 },
    #[error("{count} spreads are consistent with the point at x = {x}")]
    TooManyRoots { x: f64, count: usize },
    #[error("candidate spreads {first:?} and {second:?} have no common value within {tol:e}")]
    EmptyIntersection {
        first: Vec<f64>,
        second: Vec<f64>,
        tol: f64,
    },
    #[error("several distinct spreads {0:?} fit both points")]
    AmbiguousSpread(Vec<f64>),
    #[error("both signs of the mean fit the data equally well (residuals {plus:e}, {minus:e})")]
    AmbiguousSign { plus: f64, minus: f64 },
    #[error("mixed-line points are inconsistent with a Gaussian of mean {mean}")]
    InconsistentCovariance { mean: f64 },
    #[error("reconstructed determinant {0:e} is not positive")]
    NonPositiveDeterminant(f64),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sign of a marginal mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Prior knowledge about the sign of a marginal mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignHint {
    Plus,
    Minus,
    #[default]
    Unknown,
}

impl SignHint {
    fn known(self) -> Option<Sign> {
        match self {
            SignHint::Plus => Some(Sign::Plus),
            SignHint::Minus => Some(Sign::Minus),
            SignHint::Unknown => None,
        }
    }

    /// Points this marginal consumes: the origin plus two or three others.
    pub fn points_needed(self) -> usize {
        if self.known().is_some() {
            3
        } else {
            4
        }
    }

    pub fn from_value(v: f64) -> SignHint {
        if v >= 0.0 {
            SignHint::Plus
        } else {
            SignHint::Minus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SignHints {
    pub q: SignHint,
    pub p: SignHint,
}

impl SignHints {
    pub const UNKNOWN: SignHints = SignHints {
        q: SignHint::Unknown,
        p: SignHint::Unknown,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    /// Log-spaced scan intervals on `(0, Δ_max]`.
    pub bracket_steps: usize,
    pub bisection_rel_tol: f64,
    /// Relative gap below which two candidate spreads are the same, for exact data.
    pub exact_match_tol: f64,
    /// Same, used as soon as any point carries `noise_sigma > 0`.
    pub noisy_match_tol: f64,
    /// Residual difference below which the sign test is undecided.
    pub sign_tie_tol: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            bracket_steps: 512,
            bisection_rel_tol: 1e-12,
            exact_match_tol: 1e-6,
            noisy_match_tol: 1e-2,
            sign_tie_tol: 1e-9,
        }
    }
}

impl ReconstructionOptions {
    fn match_tol(&self, points: &[TomogramPoint]) -> f64 {
        if points.iter().any(|p| p.noise_sigma > 0.0) {
            self.noisy_match_tol
        } else {
            self.exact_match_tol
        }
    }
}

/// Mean and spread read off one marginal tomogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub mean: f64,
    /// Standard deviation along the line.
    pub spread: f64,
    /// `true` when the sign of the mean was decided from the data rather than supplied.
    pub sign_resolved: bool,
    /// Largest relative forward-model error over the consumed points.
    pub residual: f64,
    pub points_used: usize,
}

fn gaussian(x: f64, mean: f64, spread: f64) -> f64 {
    let d = (x - mean) / spread;
    (-0.5 * d * d).exp() / (spread * SQRT_2PI)
}

fn relative_error(model: f64, measured: f64) -> f64 {
    (model - measured).abs() / measured.abs().max(f64::MIN_POSITIVE)
}

/// Mean of a Gaussian of known spread from its density at the origin.
pub fn mean_from_origin_point(w0: f64, spread: f64, sign: Sign) -> Result<f64, ReconstructionError> {
    if !(w0.is_finite() && w0 > 0.0) {
        return Err(ReconstructionError::InvalidDensity { index: 0, value: w0 });
    }
    if !(spread.is_finite() && spread > 0.0) {
        return Err(ReconstructionError::InvalidPoints(format!("spread {spread} must be positive")));
    }
    let bound = 1.0 / (spread * SQRT_2PI);
    let log_ratio = -(w0 * spread * SQRT_2PI).ln();
    if log_ratio < 0.0 {
        if w0 <= bound * (1.0 + 1e-12) {
            return Ok(0.0);
        }
        return Err(ReconstructionError::OriginDensityOutOfRange { w0, bound, spread });
    }
    Ok(sign.factor() * spread * (2.0 * log_ratio).sqrt())
}

/// Candidate spread together with its conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SpreadRoot {
    value: f64,
    /// `|Δ · ∂G/∂Δ|` at the root; larger is better conditioned.
    sensitivity: f64,
}

/// Log-residual of the spread equation: zero iff the Gaussian through
/// `(0, w0)` with spread `Δ` and the given sign passes through `(x, wx)`.
/// At `Δ ≥ Δ_max = 1/(w0√2π)` the mean is exactly zero; evaluating the
/// logarithm there would leave a rounding residue amplified by the square root.
fn spread_residual(delta: f64, x: f64, wx: f64, w0: f64, sign: Sign) -> f64 {
    let delta_max = 1.0 / (w0 * SQRT_2PI);
    let log_ratio = if delta >= delta_max {
        0.0
    } else {
        (-(w0 * delta * SQRT_2PI).ln()).max(0.0)
    };
    let mean = sign.factor() * delta * (2.0 * log_ratio).sqrt();
    let d = (x - mean) / delta;
    (wx * delta * SQRT_2PI).ln() + 0.5 * d * d
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs() {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// All roots of `f` on `[lo, hi]`, scanning `steps` log-spaced cells.
///
/// Sign changes are bisected. Cells where `|f|` dips without changing sign
/// are minimised, so close root pairs and tangential roots are not lost.
/// A value within `endpoint_tol` of zero at `hi` counts as a root.
fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize, rel_tol: f64, endpoint_tol: f64) -> Vec<f64> {
    let steps = steps.max(2);
    let ratio = (hi / lo).ln();
    let grid: Vec<f64> = (0..=steps)
        .map(|i| {
            if i == steps {
                hi
            } else {
                lo * (ratio * i as f64 / steps as f64).exp()
            }
        })
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&g| f(g)).collect();
    let mut roots = Vec::new();
    for i in 0..steps {
        let (va, vb) = (vals[i], vals[i + 1]);
        if va == 0.0 {
            roots.push(grid[i]);
        } else if vb != 0.0 && va.signum() != vb.signum() {
            roots.push(bisect(&f, grid[i], grid[i + 1], rel_tol));
        }
    }
    let endpoint_root = vals[steps].abs() <= endpoint_tol;
    if endpoint_root {
        roots.push(hi);
    }
    for i in 1..=steps {
        let v = vals[i];
        let left = vals[i - 1];
        let right = if i < steps { vals[i + 1] } else { v };
        if v == 0.0 || v.signum() != left.signum() || v.signum() != right.signum() {
            continue;
        }
        if !(v.abs() <= left.abs() && v.abs() <= right.abs()) {
            continue;
        }
        let s = v.signum();
        let (a, b) = (grid[i - 1], grid[(i + 1).min(steps)]);
        let g = |x: f64| s * f(x);
        let (xm, fm) = golden_min(&g, a, b);
        if fm < 0.0 {
            roots.push(bisect(&f, a, xm, rel_tol));
            roots.push(bisect(&f, xm, b, rel_tol));
        } else if fm <= endpoint_tol {
            roots.push(xm);
        }
    }
    if endpoint_root {
        // f is square-root singular at hi, so a bisected neighbour is only a worse copy
        for r in roots.iter_mut() {
            if hi - *r <= 1e-9 * hi {
                *r = hi;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    roots
}

fn spread_roots(
    x: f64,
    wx: f64,
    w0: f64,
    sign: Sign,
    opts: &ReconstructionOptions,
) -> Result<Vec<SpreadRoot>, ReconstructionError> {
    if !(x.is_finite() && x != 0.0) {
        return Err(ReconstructionError::InvalidPoints(format!("off-origin position must be non-zero, got {x}")));
    }
    for (index, value) in [(0, w0), (1, wx)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(ReconstructionError::InvalidDensity { index, value });
        }
    }
    let hi = 1.0 / (w0 * SQRT_2PI);
    let lo = 1e-12 * hi;
    let f = |d: f64| spread_residual(d, x, wx, w0, sign);
    let roots = scan_roots(f, lo, hi, opts.bracket_steps, opts.bisection_rel_tol, 1e-12);
    Ok(roots
        .into_iter()
        .map(|value| {
            let h = 1e-6;
            let up = f(value * (1.0 + h));
            let down = f((value * (1.0 - h)).max(lo));
            SpreadRoot {
                value,
                sensitivity: ((up - down) / (2.0 * h)).abs(),
            }
        })
        .collect())
}

/// Spreads `Δ ∈ (0, Δ_max]` consistent with `(0, w0)` and `(x, wx)`, ascending.
pub fn spread_candidates(
    x: f64,
    wx: f64,
    w0: f64,
    sign: Sign,
    bracket_steps: usize,
) -> Result<Vec<f64>, ReconstructionError> {
    let opts = ReconstructionOptions {
        bracket_steps,
        ..Default::default()
    };
    let roots = spread_roots(x, wx, w0, sign, &opts)?;
    match roots.len() {
        0 => Err(ReconstructionError::NoRoot { x }),
        1 | 2 => Ok(roots.iter().map(|r| r.value).collect()),
        count => Err(ReconstructionError::TooManyRoots { x, count }),
    }
}

fn checked_roots(
    x: f64,
    wx: f64,
    w0: f64,
    sign: Sign,
    opts: &ReconstructionOptions,
) -> Result<Vec<SpreadRoot>, ReconstructionError> {
    let roots = spread_roots(x, wx, w0, sign, opts)?;
    match roots.len() {
        0 => Err(ReconstructionError::NoRoot { x }),
        1 | 2 => Ok(roots),
        count => Err(ReconstructionError::TooManyRoots { x, count }),
    }
}

/// Picks the single value common to two candidate lists.
///
/// Matching pairs closer than `tol` to each other are one cluster; more than
/// one cluster is ambiguous. Within the cluster the better-conditioned
/// candidate wins.
fn intersect<T: Copy>(
    first: &[T],
    second: &[T],
    value: impl Fn(&T) -> f64,
    quality: impl Fn(&T) -> f64,
    tol: f64,
) -> Result<Option<T>, Vec<f64>> {
    let mut matches: Vec<(f64, T)> = Vec::new();
    for a in first {
        for b in second {
            let (va, vb) = (value(a), value(b));
            let gap = (va - vb).abs() / va.abs().max(vb.abs());
            if gap < tol {
                let best = if quality(a) >= quality(b) { *a } else { *b };
                matches.push((gap, best));
            }
        }
    }
    if matches.is_empty() {
        return Ok(None);
    }
    let mut centres: Vec<f64> = matches.iter().map(|(_, t)| value(t)).collect();
    centres.sort_by(f64::total_cmp);
    let distinct = centres.windows(2).filter(|w| (w[1] - w[0]).abs() > tol * w[1].abs()).count() + 1;
    if distinct > 1 {
        return Err(centres);
    }
    matches.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Some(matches[0].1))
}

fn validate_values(points: &[TomogramPoint]) -> Result<(), ReconstructionError> {
    for (index, p) in points.iter().enumerate() {
        if !(p.value.is_finite() && p.value > 0.0) {
            return Err(ReconstructionError::InvalidDensity { index, value: p.value });
        }
        if !p.x.is_finite() {
            return Err(ReconstructionError::InvalidPoints(format!("point {index} has x = {}", p.x)));
        }
    }
    Ok(())
}

fn check_same_line(points: &[TomogramPoint]) -> Result<TomographyLine, ReconstructionError> {
    let first = points
        .first()
        .ok_or_else(|| ReconstructionError::InvalidPoints("no points".into()))?
        .line;
    if points.iter().any(|p| !p.line.same_direction(&first, 1e-12)) {
        return Err(ReconstructionError::InvalidPoints("points lie on different lines".into()));
    }
    Ok(first)
}

fn marginal_for_sign(
    origin: &TomogramPoint,
    pair: [&TomogramPoint; 2],
    sign: Sign,
    tol: f64,
    opts: &ReconstructionOptions,
) -> Result<(f64, f64), ReconstructionError> {
    let w0 = origin.value;
    let c1 = checked_roots(pair[0].x, pair[0].value, w0, sign, opts)?;
    let c2 = checked_roots(pair[1].x, pair[1].value, w0, sign, opts)?;
    let common = intersect(&c1, &c2, |r| r.value, |r| r.sensitivity, tol).map_err(ReconstructionError::AmbiguousSpread)?;
    let root = common.ok_or_else(|| ReconstructionError::EmptyIntersection {
        first: c1.iter().map(|r| r.value).collect(),
        second: c2.iter().map(|r| r.value).collect(),
        tol,
    })?;
    let mean = mean_from_origin_point(w0, root.value, sign)?;
    Ok((mean, root.value))
}

/// Mean and spread along one line from 3 (known sign) or 4 (unknown sign) points.
///
/// Exactly one point must sit at `x = 0`; the others need distinct `|x|`.
/// Points beyond what the hint requires are ignored.
pub fn reconstruct_marginal(
    points: &[TomogramPoint],
    hint: SignHint,
    opts: &ReconstructionOptions,
) -> Result<MarginalEstimate, ReconstructionError> {
    validate_values(points)?;
    check_same_line(points)?;
    let unit: Vec<TomogramPoint> = points.iter().map(TomogramPoint::normalized).collect();
    let origins: Vec<&TomogramPoint> = unit.iter().filter(|p| p.x == 0.0).collect();
    if origins.len() != 1 {
        return Err(ReconstructionError::InvalidPoints(format!(
            "need exactly one point at x = 0, found {}",
            origins.len()
        )));
    }
    let origin = origins[0];
    let others: Vec<&TomogramPoint> = unit.iter().filter(|p| p.x != 0.0).collect();
    let needed = hint.points_needed() - 1;
    if others.len() < needed {
        return Err(ReconstructionError::InvalidPoints(format!(
            "need {needed} points at x != 0 for sign hint {hint:?}, found {}",
            others.len()
        )));
    }
    let others = &others[..needed];
    for (i, a) in others.iter().enumerate() {
        for b in &others[i + 1..] {
            if (a.x.abs() - b.x.abs()).abs() <= 1e-12 * a.x.abs().max(b.x.abs()) {
                return Err(ReconstructionError::InvalidPoints(format!(
                    "off-origin points need distinct |x|, got {} and {}",
                    a.x, b.x
                )));
            }
        }
    }
    let mut consumed = vec![*origin];
    consumed.extend(others.iter().map(|p| **p));
    let tol = opts.match_tol(&consumed);
    let pair = [others[0], others[1]];

    let ((mean, spread), sign_resolved) = match hint.known() {
        Some(sign) => (marginal_for_sign(origin, pair, sign, tol, opts)?, false),
        None => {
            let check = others[2];
            let plus = marginal_for_sign(origin, pair, Sign::Plus, tol, opts);
            let minus = marginal_for_sign(origin, pair, Sign::Minus, tol, opts);
            let chosen = match (plus, minus) {
                (Ok(a), Err(_)) => a,
                (Err(_), Ok(b)) => b,
                (Err(e), Err(_)) => return Err(e),
                (Ok(a), Ok(b)) => {
                    let same = (a.0 - b.0).abs() <= tol * a.1 && (a.1 - b.1).abs() <= tol * a.1;
                    if same {
                        a
                    } else {
                        let ra = relative_error(gaussian(check.x, a.0, a.1), check.value);
                        let rb = relative_error(gaussian(check.x, b.0, b.1), check.value);
                        if (ra - rb).abs() <= opts.sign_tie_tol {
                            return Err(ReconstructionError::AmbiguousSign { plus: ra, minus: rb });
                        }
                        if ra < rb {
                            a
                        } else {
                            b
                        }
                    }
                }
            };
            (chosen, true)
        }
    };
    let residual = consumed
        .iter()
        .map(|p| relative_error(gaussian(p.x, mean, spread), p.value))
        .fold(0.0, f64::max);
    Ok(MarginalEstimate {
        mean,
        spread,
        sign_resolved,
        residual,
        points_used: consumed.len(),
    })
}

/// Covariance read off a mixed line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub cov_qp: f64,
    /// Variance along the line, `μ²Δq² + ν²Δp² + 2μνσ`.
    pub line_variance: f64,
    pub residual: f64,
}

/// Line-variance candidates for a Gaussian of known mean through `(x, w)`,
/// each paired with `|1 − y|` (its conditioning, larger is better).
fn line_variance_candidates(x: f64, w: f64, mean: f64) -> Vec<(f64, f64)> {
    // ln u + d²/u = c with c = −2 ln(w√2π); y = d²/u solves y − ln y = c − ln d².
    let c = -2.0 * (w * SQRT_2PI).ln();
    let d2 = (x - mean) * (x - mean);
    if d2 == 0.0 {
        return vec![(c.exp(), 1.0)];
    }
    let kappa = c - d2.ln();
    if kappa < 1.0 - 1e-9 {
        return vec![];
    }
    if kappa <= 1.0 {
        return vec![(d2, 0.0)];
    }
    let z = -(-kappa).exp();
    [LambertBranch::Principal, LambertBranch::Lower]
        .into_iter()
        .filter_map(|br| lambert_w(z, br))
        .map(|wv| {
            // du/u ∝ (δw/w + √y·δmean/√u) / |1 − y|; mean errors matter away from the peak.
            let y = -wv;
            (d2 / y, (1.0 - y).abs() / (1.0 + 2.0 * y.sqrt()))
        })
        .collect()
}

/// Covariance from two points on a mixed line, given the marginal cumulants.
pub fn reconstruct_covariance(
    points: &[TomogramPoint],
    mean_q: f64,
    mean_p: f64,
    var_q: f64,
    var_p: f64,
    opts: &ReconstructionOptions,
) -> Result<CovarianceEstimate, ReconstructionError> {
    if points.len() != 2 {
        return Err(ReconstructionError::InvalidPoints(format!(
            "covariance needs exactly 2 mixed-line points, got {}",
            points.len()
        )));
    }
    validate_values(points)?;
    let line = check_same_line(points)?.normalized();
    if (line.mu * line.nu).abs() < 1e-12 {
        return Err(ReconstructionError::InvalidPoints("covariance line must mix q and p".into()));
    }
    let unit: Vec<TomogramPoint> = points.iter().map(TomogramPoint::normalized).collect();
    if unit[0].x == unit[1].x {
        return Err(ReconstructionError::InvalidPoints("mixed-line points must have distinct x".into()));
    }
    let mean = line.mu * mean_q + line.nu * mean_p;
    let tol = opts.match_tol(&unit);
    let c1 = line_variance_candidates(unit[0].x, unit[0].value, mean);
    let c2 = line_variance_candidates(unit[1].x, unit[1].value, mean);
    let chosen = intersect(&c1, &c2, |c| c.0, |c| c.1, tol)
        .map_err(|_| ReconstructionError::InconsistentCovariance { mean })?
        .ok_or(ReconstructionError::InconsistentCovariance { mean })?;
    let u = chosen.0;
    let cov_qp = (u - line.mu * line.mu * var_q - line.nu * line.nu * var_p) / (2.0 * line.mu * line.nu);
    let det = var_q * var_p - cov_qp * cov_qp;
    if !(det > 0.0) {
        return Err(ReconstructionError::NonPositiveDeterminant(det));
    }
    let spread = u.sqrt();
    let residual = unit
        .iter()
        .map(|p| relative_error(gaussian(p.x, mean, spread), p.value))
        .fold(0.0, f64::max);
    Ok(CovarianceEstimate {
        cov_qp,
        line_variance: u,
        residual,
    })
}

/// Tomogram points grouped by role.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatePoints {
    pub q: Vec<TomogramPoint>,
    pub p: Vec<TomogramPoint>,
    pub mixed: Vec<TomogramPoint>,
}

impl StatePoints {
    /// Sorts arbitrary points onto the position, momentum and mixed lines.
    pub fn from_points(points: &[TomogramPoint]) -> Result<Self, ReconstructionError> {
        let mut out = StatePoints::default();
        for pt in points {
            if pt.line.same_direction(&TomographyLine::POSITION, 1e-12) {
                out.q.push(*pt);
            } else if pt.line.same_direction(&TomographyLine::MOMENTUM, 1e-12) {
                out.p.push(*pt);
            } else {
                out.mixed.push(*pt);
            }
        }
        if let Some(first) = out.mixed.first() {
            if out.mixed.iter().any(|p| !p.line.same_direction(&first.line, 1e-12)) {
                return Err(ReconstructionError::InvalidPoints("more than one mixed line".into()));
            }
        }
        Ok(out)
    }

    pub fn all(&self) -> Vec<TomogramPoint> {
        self.q.iter().chain(&self.p).chain(&self.mixed).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.q.len() + self.p.len() + self.mixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Result of [`reconstruct_state`], in rescaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateReconstruction {
    pub state: CumulantState,
    pub q: MarginalEstimate,
    pub p: MarginalEstimate,
    pub covariance: CovarianceEstimate,
    pub points_used: usize,
}

/// All five cumulants from 8 (both signs known) to 10 (both unknown) points.
pub fn reconstruct_state(
    q_points: &[TomogramPoint],
    p_points: &[TomogramPoint],
    mixed_points: &[TomogramPoint],
    hints: SignHints,
    opts: &ReconstructionOptions,
) -> Result<StateReconstruction, ReconstructionError> {
    for (pts, want, name) in [
        (q_points, TomographyLine::POSITION, "position"),
        (p_points, TomographyLine::MOMENTUM, "momentum"),
    ] {
        if pts.iter().any(|p| !p.line.same_direction(&want, 1e-12)) {
            return Err(ReconstructionError::InvalidPoints(format!("{name} points must lie on the {name} line")));
        }
    }
    let q = reconstruct_marginal(q_points, hints.q, opts)?;
    let p = reconstruct_marginal(p_points, hints.p, opts)?;
    let var_q = q.spread * q.spread;
    let var_p = p.spread * p.spread;
    let covariance = reconstruct_covariance(mixed_points, q.mean, p.mean, var_q, var_p, opts)?;
    let state = CumulantState::new(q.mean, p.mean, var_q, var_p, covariance.cov_qp)?;
    Ok(StateReconstruction {
        state,
        q,
        p,
        covariance,
        points_used: q.points_used + p.points_used + mixed_points.len(),
    })
}

pub fn reconstruct_from_points(
    points: &StatePoints,
    hints: SignHints,
    opts: &ReconstructionOptions,
) -> Result<StateReconstruction, ReconstructionError> {
    reconstruct_state(&points.q, &points.p, &points.mixed, hints, opts)
}

/// The three densities used by the time-dependent procedure:
/// `ϖ(⟨p⟩, 0, 1)`, `ϖ(⟨q⟩, 1, 0)` and `ϖ((⟨q⟩+⟨p⟩)/√2, 1/√2, 1/√2)`.
pub fn time_dependent_tomograms(s: &CumulantState) -> Result<[f64; 3], ReconstructionError> {
    let diag = TomographyLine::DIAGONAL;
    Ok([
        radon_gaussian(s, s.mean_p, &TomographyLine::MOMENTUM)?,
        radon_gaussian(s, s.mean_q, &TomographyLine::POSITION)?,
        radon_gaussian(s, diag.line_mean(s), &diag)?,
    ])
}

/// Inverts [`time_dependent_tomograms`] given externally known means.
pub fn reconstruct_state_time_dependent(
    w1: f64,
    w2: f64,
    w3: f64,
    mean_q: f64,
    mean_p: f64,
) -> Result<CumulantState, ReconstructionError> {
    for (index, value) in [(0, w1), (1, w2), (2, w3)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(ReconstructionError::InvalidDensity { index, value });
        }
    }
    let dp = 1.0 / (SQRT_2PI * w1);
    let dq = 1.0 / (SQRT_2PI * w2);
    let var_q = dq * dq;
    let var_p = dp * dp;
    let half_sum = 1.0 / (2.0 * PI * w3 * w3);
    let cov_qp = half_sum - 0.5 * (var_q + var_p);
    let det = var_q * var_p - cov_qp * cov_qp;
    if !(det > 0.0) {
        return Err(ReconstructionError::NonPositiveDeterminant(det));
    }
    Ok(CumulantState::new(mean_q, mean_p, var_q, var_p, cov_qp)?)
}

/// Where to place measurement points along each line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLayout {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub mixed_line: TomographyLine,
    pub mixed: Vec<f64>,
}

fn marginal_positions(mean: f64, spread: f64, off_origin: usize) -> Vec<f64> {
    const OFFSETS: [f64; 14] = [1.5, -1.5, 0.75, -0.75, 2.0, -2.0, 1.0, -1.0, 1.25, -1.25, 0.5, -0.5, 2.5, -2.5];
    let mut xs = vec![0.0];
    for k in OFFSETS {
        if xs.len() > off_origin {
            break;
        }
        let x = mean + k * spread;
        let clear = xs[1..].iter().all(|c: &f64| (x.abs() - c.abs()).abs() >= 0.1 * spread);
        if x.abs() >= 0.1 * spread && clear {
            xs.push(x);
        }
    }
    xs
}

/// Default layout around a guess of the state: `x = 0` and `mean ± 1.5·spread`
/// (plus one more when the sign is unknown) on the marginals, and the line
/// mean and mean + 1.5·spread on the diagonal.
///
/// The second diagonal point stays clear of `mean ± spread`, where the density
/// is stationary in the variance and carries no information about it.
pub fn default_layout(guess: &CumulantState, hints: SignHints) -> PointLayout {
    let diag = TomographyLine::DIAGONAL;
    let md = diag.line_mean(guess);
    let spread = diag.line_variance(guess).sqrt();
    PointLayout {
        q: marginal_positions(guess.mean_q, guess.var_q.sqrt(), hints.q.points_needed() - 1),
        p: marginal_positions(guess.mean_p, guess.var_p.sqrt(), hints.p.points_needed() - 1),
        mixed_line: diag,
        mixed: vec![md, md + 1.5 * spread],
    }
}

fn derived_seed(seed: u64, line: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(line.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// Simulates the measurements of a layout. Each line gets its own stream
/// derived from `seed`.
pub fn measure_layout(
    s: &CumulantState,
    layout: &PointLayout,
    noise: &NoiseModel,
    seed: u64,
) -> Result<StatePoints, ReconstructionError> {
    Ok(StatePoints {
        q: sample_tomogram(s, &TomographyLine::POSITION, &layout.q, noise, derived_seed(seed, 1))?,
        p: sample_tomogram(s, &TomographyLine::MOMENTUM, &layout.p, noise, derived_seed(seed, 2))?,
        mixed: sample_tomogram(s, &layout.mixed_line, &layout.mixed, noise, derived_seed(seed, 3))?,
    })
}
