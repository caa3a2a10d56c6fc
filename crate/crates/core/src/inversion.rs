// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Master-equation coefficients from cumulants.
//!
//! The means decay as `e^{−λt} M₀(t)` with a λ-free `M₀`, so λ is a log ratio.
//! The packed second moments obey `X(t) = A X(0) + B D`; `B` is invertible
//! for `t > 0` away from the closed-oscillator revivals, which gives `D`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{
    evolve_means, stationary_covariance, undamped_mean_propagator, EvolutionError, MomentVector,
    SecondMomentPropagator,
};
use crate::model::{
    check_complete_positivity_with_tol, CpVerdict, Covariance, CumulantState, Diffusion, MasterEqCoefficients,
    ModelError, PhysicalParams,
};
use crate::reconstruction::{
    reconstruct_from_points, ReconstructionError, ReconstructionOptions, SignHints, StatePoints,
};
use crate::tomography::{make_rescaling, unscale_state, Rescaling, TomographyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InversionError {
    #[error("time must be positive and finite, got {0}")]
    InvalidTime(f64),
    #[error("initial means vanish after free propagation, so λ is unobservable")]
    Unobservable,
    #[error("final means vanish, so λ is not finite")]
    NonFiniteLambda,
    #[error("final means are {angle:e} rad off the undamped direction (tolerance {tol:e})")]
    NotParallel { angle: f64, tol: f64 },
    #[error("integrated propagator is singular at t = {0}")]
    Singular(f64),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Estimator for λ from two mean vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMethod {
    /// Log ratio of Euclidean norms in rescaled coordinates.
    #[default]
    NormRatio,
    /// Average of per-component log ratios; components below `1e-8` of the
    /// norm are skipped.
    Componentwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub lambda: f64,
    /// Angle in rad between the final means and the undamped prediction.
    pub angle: f64,
}

fn check_time(t: f64) -> Result<(), InversionError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(InversionError::InvalidTime(t))
    }
}

/// λ from means at `0` and `t`. Fails if the two vectors are more than
/// `angle_tol` apart in direction.
pub fn lambda_from_means(
    p: &PhysicalParams,
    means0: (f64, f64),
    means_t: (f64, f64),
    t: f64,
    rescaling: &Rescaling,
    method: LambdaMethod,
    angle_tol: f64,
) -> Result<LambdaEstimate, InversionError> {
    check_time(t)?;
    let m = undamped_mean_propagator(p, t);
    let free = [
        rescaling.scale_q * (m[0][0] * means0.0 + m[0][1] * means0.1),
        rescaling.scale_p * (m[1][0] * means0.0 + m[1][1] * means0.1),
    ];
    let fin = [rescaling.scale_q * means_t.0, rescaling.scale_p * means_t.1];
    let free_norm = free[0].hypot(free[1]);
    let fin_norm = fin[0].hypot(fin[1]);
    if !(free_norm > 0.0) {
        return Err(InversionError::Unobservable);
    }
    if !(fin_norm > 0.0) {
        return Err(InversionError::NonFiniteLambda);
    }
    let cross = free[0] * fin[1] - free[1] * fin[0];
    let dot = free[0] * fin[0] + free[1] * fin[1];
    let angle = cross.abs().atan2(dot);
    if !(angle <= angle_tol) {
        return Err(InversionError::NotParallel { angle, tol: angle_tol });
    }
    let lambda = match method {
        LambdaMethod::NormRatio => (free_norm / fin_norm).ln() / t,
        LambdaMethod::Componentwise => {
            let rates: Vec<f64> = (0..2)
                .filter(|&i| free[i].abs() > 1e-8 * free_norm && fin[i].abs() > 1e-8 * fin_norm)
                .map(|i| (free[i] / fin[i]).ln() / t)
                .collect();
            if rates.is_empty() {
                return Err(InversionError::NonFiniteLambda);
            }
            rates.iter().sum::<f64>() / rates.len() as f64
        }
    };
    if !lambda.is_finite() {
        return Err(InversionError::NonFiniteLambda);
    }
    Ok(LambdaEstimate { lambda, angle })
}

/// Diffusion coefficients that carry `cov0` to `cov_t` in time `t` (requires `ω > 0`).
pub fn diffusion_from_covariances(
    p: &PhysicalParams,
    lambda: f64,
    cov0: &Covariance,
    cov_t: &Covariance,
    t: f64,
) -> Result<Diffusion, InversionError> {
    check_time(t)?;
    let prop = SecondMomentPropagator::new(p, lambda, t)?;
    let x0 = MomentVector::pack(p, cov0)?;
    let xt = MomentVector::pack(p, cov_t)?;
    let b = prop.integrated;
    let scale = b.amax();
    let lu = b.lu();
    if !(scale > 0.0) || lu.determinant().abs() <= 1e-13 * scale.powi(3) {
        return Err(InversionError::Singular(t));
    }
    let rhs = xt.0 - prop.homogeneous * x0.0;
    let d = lu.solve(&rhs).ok_or(InversionError::Singular(t))?;
    let (d_qq, d_pp, d_qp) = MomentVector(d).unpack_diffusion(p)?;
    Ok(Diffusion { d_qq, d_pp, d_qp })
}

/// Diffusion coefficients whose fixed point is `cov_inf`.
pub fn diffusion_from_stationary(
    p: &PhysicalParams,
    lambda: f64,
    cov_inf: &Covariance,
) -> Result<Diffusion, InversionError> {
    let threshold = p.contraction_threshold();
    if !(lambda > threshold) {
        return Err(EvolutionError::NonContracting { lambda, threshold }.into());
    }
    let (m, w2) = (p.m, p.omega * p.omega);
    let Covariance {
        var_q,
        var_p,
        cov_qp: sigma,
    } = *cov_inf;
    Ok(Diffusion {
        d_qq: (lambda - p.delta) * var_q - sigma / m,
        d_pp: (lambda + p.delta) * var_p + m * w2 * sigma,
        d_qp: 0.5 * (m * w2 * var_q - var_p / m + 2.0 * lambda * sigma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOptions {
    pub reconstruction: ReconstructionOptions,
    pub lambda_method: LambdaMethod,
    /// Largest accepted angle between measured and predicted mean directions.
    pub angle_tol: f64,
    /// Relative slack for the determinant constraint on estimated coefficients.
    pub cp_rel_tol: f64,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            reconstruction: ReconstructionOptions::default(),
            lambda_method: LambdaMethod::NormRatio,
            angle_tol: 1e-6,
            cp_rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub q: f64,
    pub p: f64,
    pub covariance: f64,
}

/// Coefficients recovered from measurements at one time, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub lambda: f64,
    pub d_qq: f64,
    pub d_pp: f64,
    pub d_qp: f64,
    pub cp_verdict: CpVerdict,
    pub residuals: Residuals,
    pub angle_diag: f64,
    pub t: f64,
    pub points_used: usize,
    pub sign_resolved: [bool; 2],
    /// Reconstructed state at `t`, physical units.
    pub state_t: CumulantState,
}

impl EstimateReport {
    pub fn coefficients(&self) -> MasterEqCoefficients {
        MasterEqCoefficients {
            lambda: self.lambda,
            d_qq: self.d_qq,
            d_pp: self.d_pp,
            d_qp: self.d_qp,
        }
    }
}

/// Reconstructs the state at `t` from rescaled tomogram points, then inverts
/// for λ and `D` against the known probe `s0`. A CP violation is reported in
/// the verdict, not as an error.
pub fn estimate_all(
    p: &PhysicalParams,
    s0: &CumulantState,
    points_at_t: &StatePoints,
    t: f64,
    hints: SignHints,
    opts: &EstimationOptions,
) -> Result<EstimateReport, InversionError> {
    check_time(t)?;
    let rescaling = make_rescaling(p, Some(s0.var_p))?;
    let rec = reconstruct_from_points(points_at_t, hints, &opts.reconstruction)?;
    let state_t = unscale_state(&rec.state, &rescaling);
    let lam = lambda_from_means(
        p,
        s0.means(),
        state_t.means(),
        t,
        &rescaling,
        opts.lambda_method,
        opts.angle_tol,
    )?;
    let d = diffusion_from_covariances(p, lam.lambda, &s0.covariance(), &state_t.covariance(), t)?;
    let coeffs = MasterEqCoefficients::from_parts(lam.lambda, d);
    let cp_verdict = check_complete_positivity_with_tol(&coeffs, p.hbar, opts.cp_rel_tol);
    Ok(EstimateReport {
        lambda: coeffs.lambda,
        d_qq: coeffs.d_qq,
        d_pp: coeffs.d_pp,
        d_qp: coeffs.d_qp,
        cp_verdict,
        residuals: Residuals {
            q: rec.q.residual,
            p: rec.p.residual,
            covariance: rec.covariance.residual,
        },
        angle_diag: lam.angle,
        t,
        points_used: rec.points_used,
        sign_resolved: [rec.q.sign_resolved, rec.p.sign_resolved],
        state_t,
    })
}

/// Like [`estimate_all`] but with `D` taken from a reconstructed stationary
/// state instead of the finite-time covariance.
pub fn estimate_stationary(
    p: &PhysicalParams,
    s0: &CumulantState,
    points_at_t: &StatePoints,
    points_stationary: &StatePoints,
    t: f64,
    hints: SignHints,
    opts: &EstimationOptions,
) -> Result<EstimateReport, InversionError> {
    let finite = estimate_all(p, s0, points_at_t, t, hints, opts)?;
    let rescaling = make_rescaling(p, Some(s0.var_p))?;
    let rec = reconstruct_from_points(points_stationary, SignHints::default(), &opts.reconstruction)?;
    let stationary = unscale_state(&rec.state, &rescaling);
    let d = diffusion_from_stationary(p, finite.lambda, &stationary.covariance())?;
    let coeffs = MasterEqCoefficients::from_parts(finite.lambda, d);
    Ok(EstimateReport {
        d_qq: d.d_qq,
        d_pp: d.d_pp,
        d_qp: d.d_qp,
        cp_verdict: check_complete_positivity_with_tol(&coeffs, p.hbar, opts.cp_rel_tol),
        residuals: Residuals {
            q: finite.residuals.q.max(rec.q.residual),
            p: finite.residuals.p.max(rec.p.residual),
            covariance: finite.residuals.covariance.max(rec.covariance.residual),
        },
        points_used: finite.points_used + rec.points_used,
        ..finite
    })
}

/// The state a stationary-mode measurement sees: zero means and the fixed-point covariance.
pub fn stationary_state(p: &PhysicalParams, c: &MasterEqCoefficients) -> Result<CumulantState, InversionError> {
    let cov = stationary_covariance(p, c)?;
    Ok(CumulantState::from_parts((0.0, 0.0), cov)?)
}

/// Means predicted at `t`; used to place points for a run.
pub fn predicted_means(
    p: &PhysicalParams,
    lambda: f64,
    s0: &CumulantState,
    t: f64,
) -> Result<(f64, f64), InversionError> {
    Ok(evolve_means(p, lambda, s0.mean_q, s0.mean_p, t)?)
}

/// `B⁻¹` for the packed second moments, exposed for cross-checks.
pub fn inverse_integrated_propagator(p: &PhysicalParams, lambda: f64, t: f64) -> Result<Matrix3<f64>, InversionError> {
    check_time(t)?;
    let prop = SecondMomentPropagator::new(p, lambda, t)?;
    prop.integrated.try_inverse().ok_or(InversionError::Singular(t))
}
