// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Domain types for the damped oscillator and its Markovian generator.
//!
//! The Hamiltonian is `H = p²/2m + mω²q²/2 + (δ/2)(qp + pq)` and the
//! environment enters through two Lindblad operators `V_j = a_j p + b_j q`.
//! Everything downstream works with the four effective coefficients
//! `λ, D_qq, D_pp, D_qp` rather than the operators themselves.
//!
//! Quantities are plain `f64` in whatever unit system the caller picks;
//! `ħ` is always explicit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative slack on the determinant constraint of complete positivity.
pub const DEFAULT_CP_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("state determinant var_q*var_p - cov_qp^2 = {0:e} must be positive")]
    NonPositiveDeterminant(f64),
}

fn finite(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value,
            reason: "must be strictly positive",
        })
    }
}

/// Known Hamiltonian data.
///
/// * `m`: mass, `> 0`
/// * `omega`: angular frequency (1/time), `>= 0`
/// * `delta`: strength of the `qp + pq` term (1/time), any sign
/// * `hbar`: action scale, `> 0`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPhysicalParams")]
pub struct PhysicalParams {
    pub m: f64,
    pub omega: f64,
    pub delta: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct RawPhysicalParams {
    m: f64,
    omega: f64,
    delta: f64,
    #[serde(default = "default_hbar")]
    hbar: f64,
}

impl TryFrom<RawPhysicalParams> for PhysicalParams {
    type Error = ModelError;

    fn try_from(raw: RawPhysicalParams) -> Result<Self, Self::Error> {
        PhysicalParams::new(raw.m, raw.omega, raw.delta, raw.hbar)
    }
}

impl PhysicalParams {
    pub fn new(m: f64, omega: f64, delta: f64, hbar: f64) -> Result<Self, ModelError> {
        positive("m", m)?;
        positive("hbar", hbar)?;
        finite("omega", omega)?;
        finite("delta", delta)?;
        if omega < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "omega",
                value: omega,
                reason: "must be non-negative",
            });
        }
        Ok(Self {
            m,
            omega,
            delta,
            hbar,
        })
    }

    /// `η² = δ² − ω²`; its sign selects hyperbolic or oscillatory motion.
    pub fn eta_squared(&self) -> f64 {
        self.delta * self.delta - self.omega * self.omega
    }

    /// `η` as a complex number: real for `δ² > ω²`, `iΩ` otherwise.
    pub fn eta(&self) -> Complex64 {
        Complex64::new(self.eta_squared(), 0.0).sqrt()
    }

    /// Largest real part among the non-friction rates, `max(Re η, 0)`.
    ///
    /// A stationary state exists iff `λ` exceeds this value.
    pub fn contraction_threshold(&self) -> f64 {
        self.eta_squared().max(0.0).sqrt()
    }
}

/// The four unknowns of the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterEqCoefficients {
    pub lambda: f64,
    pub d_qq: f64,
    pub d_pp: f64,
    pub d_qp: f64,
}

/// Diffusion part of [`MasterEqCoefficients`] on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diffusion {
    pub d_qq: f64,
    pub d_pp: f64,
    pub d_qp: f64,
}

impl MasterEqCoefficients {
    pub fn new(lambda: f64, d_qq: f64, d_pp: f64, d_qp: f64) -> Result<Self, ModelError> {
        Ok(Self {
            lambda: finite("lambda", lambda)?,
            d_qq: finite("d_qq", d_qq)?,
            d_pp: finite("d_pp", d_pp)?,
            d_qp: finite("d_qp", d_qp)?,
        })
    }

    pub fn from_parts(lambda: f64, diffusion: Diffusion) -> Self {
        Self {
            lambda,
            d_qq: diffusion.d_qq,
            d_pp: diffusion.d_pp,
            d_qp: diffusion.d_qp,
        }
    }

    pub fn diffusion(&self) -> Diffusion {
        Diffusion {
            d_qq: self.d_qq,
            d_pp: self.d_pp,
            d_qp: self.d_qp,
        }
    }

    pub fn scaled_diffusion(&self, k: f64) -> Self {
        Self {
            lambda: self.lambda,
            d_qq: k * self.d_qq,
            d_pp: k * self.d_pp,
            d_qp: k * self.d_qp,
        }
    }
}

/// Coefficients of `V_j = a_j p + b_j q`, `j = 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladCoefficients {
    pub a1: Complex64,
    pub a2: Complex64,
    pub b1: Complex64,
    pub b2: Complex64,
}

/// First and second cumulants of a Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCumulantState")]
pub struct CumulantState {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

#[derive(Deserialize)]
struct RawCumulantState {
    mean_q: f64,
    mean_p: f64,
    var_q: f64,
    var_p: f64,
    cov_qp: f64,
}

impl TryFrom<RawCumulantState> for CumulantState {
    type Error = ModelError;

    fn try_from(r: RawCumulantState) -> Result<Self, Self::Error> {
        CumulantState::new(r.mean_q, r.mean_p, r.var_q, r.var_p, r.cov_qp)
    }
}

/// Second cumulants `(Δq², Δp², σ(q,p))` without the means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

impl Covariance {
    pub fn new(var_q: f64, var_p: f64, cov_qp: f64) -> Self {
        Self {
            var_q,
            var_p,
            cov_qp,
        }
    }

    pub fn det(&self) -> f64 {
        self.var_q * self.var_p - self.cov_qp * self.cov_qp
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(k * self.var_q, k * self.var_p, k * self.cov_qp)
    }
}

impl CumulantState {
    /// Builds a state, requiring positive variances and a positive determinant.
    pub fn new(
        mean_q: f64,
        mean_p: f64,
        var_q: f64,
        var_p: f64,
        cov_qp: f64,
    ) -> Result<Self, ModelError> {
        finite("mean_q", mean_q)?;
        finite("mean_p", mean_p)?;
        positive("var_q", var_q)?;
        positive("var_p", var_p)?;
        finite("cov_qp", cov_qp)?;
        let s = Self {
            mean_q,
            mean_p,
            var_q,
            var_p,
            cov_qp,
        };
        let det = s.det();
        if det > 0.0 {
            Ok(s)
        } else {
            Err(ModelError::NonPositiveDeterminant(det))
        }
    }

    pub fn from_parts(means: (f64, f64), cov: Covariance) -> Result<Self, ModelError> {
        Self::new(means.0, means.1, cov.var_q, cov.var_p, cov.cov_qp)
    }

    pub fn det(&self) -> f64 {
        self.var_q * self.var_p - self.cov_qp * self.cov_qp
    }

    pub fn means(&self) -> (f64, f64) {
        (self.mean_q, self.mean_p)
    }

    pub fn covariance(&self) -> Covariance {
        Covariance::new(self.var_q, self.var_p, self.cov_qp)
    }

    /// Robertson–Schrödinger check `det ≥ ħ²/4`.
    pub fn is_physical(&self, hbar: f64) -> bool {
        self.det() >= 0.25 * hbar * hbar
    }
}

/// Which of the three complete-positivity constraints failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpConstraint {
    /// `D_qq > 0`
    PositiveDqq,
    /// `D_pp > 0`
    PositiveDpp,
    /// `D_qq D_pp − D_qp² ≥ λ²ħ²/4`
    Determinant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "constraint", rename_all = "snake_case")]
pub enum CpVerdict {
    Satisfied,
    Violated(CpConstraint),
}

impl CpVerdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, CpVerdict::Satisfied)
    }
}

/// Maps Lindblad operator coefficients to `(λ, D_qq, D_pp, D_qp)`.
pub fn coefficients_from_lindblad(
    lc: &LindbladCoefficients,
    hbar: f64,
) -> Result<MasterEqCoefficients, ModelError> {
    positive("hbar", hbar)?;
    for (name, z) in [("a1", lc.a1), ("a2", lc.a2), ("b1", lc.b1), ("b2", lc.b2)] {
        finite(name, z.re)?;
        finite(name, z.im)?;
    }
    let cross = lc.a1.conj() * lc.b1 + lc.a2.conj() * lc.b2;
    let half_hbar = 0.5 * hbar;
    MasterEqCoefficients::new(
        -cross.im,
        half_hbar * (lc.a1.norm_sqr() + lc.a2.norm_sqr()),
        half_hbar * (lc.b1.norm_sqr() + lc.b2.norm_sqr()),
        -half_hbar * cross.re,
    )
}

/// Checks complete positivity with the default relative slack.
pub fn check_complete_positivity(c: &MasterEqCoefficients, hbar: f64) -> CpVerdict {
    check_complete_positivity_with_tol(c, hbar, DEFAULT_CP_REL_TOL)
}

/// Checks `D_qq > 0`, `D_pp > 0` and `D_qq D_pp − D_qp² ≥ λ²ħ²/4`, in that order.
///
/// The last inequality is allowed to fail by `rel_tol` times the magnitude of
/// its largest term.
pub fn check_complete_positivity_with_tol(
    c: &MasterEqCoefficients,
    hbar: f64,
    rel_tol: f64,
) -> CpVerdict {
    if !(c.d_qq > 0.0) {
        return CpVerdict::Violated(CpConstraint::PositiveDqq);
    }
    if !(c.d_pp > 0.0) {
        return CpVerdict::Violated(CpConstraint::PositiveDpp);
    }
    let product = c.d_qq * c.d_pp;
    let cross = c.d_qp * c.d_qp;
    let bound = 0.25 * c.lambda * c.lambda * hbar * hbar;
    let scale = product.max(cross).max(bound);
    if product - cross - bound >= -rel_tol * scale {
        CpVerdict::Satisfied
    } else {
        CpVerdict::Violated(CpConstraint::Determinant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_lindblad_gives_zero_coefficients() {
        let lc = LindbladCoefficients {
            a1: c(0.0, 0.0),
            a2: c(0.0, 0.0),
            b1: c(0.0, 0.0),
            b2: c(0.0, 0.0),
        };
        let k = coefficients_from_lindblad(&lc, 1.0).unwrap();
        assert_eq!(k.lambda, 0.0);
        assert_eq!(k.d_qq, 0.0);
        assert_eq!(k.d_pp, 0.0);
        assert_eq!(k.d_qp, 0.0);
    }

    #[test]
    fn lindblad_equality_case() {
        let lc = LindbladCoefficients {
            a1: c(1.0, 0.0),
            a2: c(0.0, 0.0),
            b1: c(0.0, 1.0),
            b2: c(0.0, 0.0),
        };
        let k = coefficients_from_lindblad(&lc, 1.0).unwrap();
        assert_eq!(k.lambda, -1.0);
        assert_eq!(k.d_qq, 0.5);
        assert_eq!(k.d_pp, 0.5);
        assert_eq!(k.d_qp, 0.0);
        assert_relative_eq!(k.d_qq * k.d_pp - k.d_qp * k.d_qp, 0.25);
        assert!(check_complete_positivity(&k, 1.0).is_satisfied());
    }

    #[test]
    fn lindblad_real_pair() {
        let lc = LindbladCoefficients {
            a1: c(1.0, 0.0),
            a2: c(0.0, 0.0),
            b1: c(1.0, 0.0),
            b2: c(0.0, 0.0),
        };
        let k = coefficients_from_lindblad(&lc, 1.0).unwrap();
        assert_eq!(k.lambda, 0.0);
        assert_eq!(k.d_qq, 0.5);
        assert_eq!(k.d_pp, 0.5);
        assert_eq!(k.d_qp, -0.5);
    }

    #[test]
    fn lindblad_rejects_non_finite() {
        let lc = LindbladCoefficients {
            a1: c(f64::NAN, 0.0),
            a2: c(0.0, 0.0),
            b1: c(1.0, 0.0),
            b2: c(0.0, 0.0),
        };
        assert!(coefficients_from_lindblad(&lc, 1.0).is_err());
        let ok = LindbladCoefficients { a1: c(1.0, 0.0), ..lc };
        assert!(coefficients_from_lindblad(&ok, 0.0).is_err());
    }

    #[test]
    fn cp_examples() {
        let k = MasterEqCoefficients::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(check_complete_positivity(&k, 1.0), CpVerdict::Satisfied);
        let k = MasterEqCoefficients::new(2.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(
            check_complete_positivity(&k, 1.0),
            CpVerdict::Violated(CpConstraint::Determinant)
        );
        let k = MasterEqCoefficients::new(0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(
            check_complete_positivity(&k, 1.0),
            CpVerdict::Violated(CpConstraint::PositiveDqq)
        );
        let k = MasterEqCoefficients::new(0.0, 1.0, -1.0, 0.0).unwrap();
        assert_eq!(
            check_complete_positivity(&k, 1.0),
            CpVerdict::Violated(CpConstraint::PositiveDpp)
        );
    }

    #[test]
    fn cumulant_state_validation() {
        assert!(CumulantState::new(0.0, 0.0, 1.0, 1.0, 0.0).is_ok());
        assert!(CumulantState::new(0.0, 0.0, -1.0, 1.0, 0.0).is_err());
        assert!(matches!(
            CumulantState::new(0.0, 0.0, 1.0, 1.0, 1.0),
            Err(ModelError::NonPositiveDeterminant(_))
        ));
        let s = CumulantState::new(0.0, 0.0, 0.5, 0.5, 0.0).unwrap();
        assert!(s.is_physical(1.0));
        assert!(!s.is_physical(1.1));
    }

    #[test]
    fn physical_params_validation() {
        assert!(PhysicalParams::new(1.0, 0.0, -0.3, 1.0).is_ok());
        assert!(PhysicalParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 0.0, 0.0).is_err());
        let p = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(p.eta().im, 1.0);
        assert_eq!(p.contraction_threshold(), 0.0);
    }

    #[test]
    fn json_field_names() {
        let p: PhysicalParams =
            serde_json::from_str(r#"{"m":1,"omega":2,"delta":0.1,"hbar":1}"#).unwrap();
        assert_eq!(p.omega, 2.0);
        let p: PhysicalParams = serde_json::from_str(r#"{"m":1,"omega":2,"delta":0.1}"#).unwrap();
        assert_eq!(p.hbar, 1.0);
        assert!(serde_json::from_str::<PhysicalParams>(r#"{"m":-1,"omega":2,"delta":0}"#).is_err());
        let s = CumulantState::new(3.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        let v = serde_json::to_value(s).unwrap();
        for key in ["mean_q", "mean_p", "var_q", "var_p", "cov_qp"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let k = MasterEqCoefficients::new(0.5, 0.6, 0.8, 0.1).unwrap();
        let v = serde_json::to_value(k).unwrap();
        for key in ["lambda", "d_qq", "d_pp", "d_qp"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    fn complex() -> impl Strategy<Value = Complex64> {
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(re, im)| Complex64::new(re, im))
    }

    proptest! {
        #[test]
        fn lindblad_coefficients_are_completely_positive(
            a1 in complex(), a2 in complex(), b1 in complex(), b2 in complex(),
            hbar in 0.1..3.0f64,
        ) {
            prop_assume!(a1.norm() + a2.norm() > 1e-3 && b1.norm() + b2.norm() > 1e-3);
            let k = coefficients_from_lindblad(&LindbladCoefficients { a1, a2, b1, b2 }, hbar).unwrap();
            prop_assert!(check_complete_positivity(&k, hbar).is_satisfied());
        }

        #[test]
        fn proportional_vectors_saturate_the_bound(
            a1 in complex(), a2 in complex(), z in complex(), hbar in 0.1..3.0f64,
        ) {
            prop_assume!(a1.norm() + a2.norm() > 1e-2 && z.norm() > 1e-2);
            let lc = LindbladCoefficients { a1, a2, b1: z * a1, b2: z * a2 };
            let k = coefficients_from_lindblad(&lc, hbar).unwrap();
            let gap = k.d_qq * k.d_pp - k.d_qp * k.d_qp - 0.25 * k.lambda * k.lambda * hbar * hbar;
            prop_assert!(gap.abs() <= 1e-10 * k.d_qq * k.d_pp);
        }

        #[test]
        fn global_phase_leaves_coefficients_unchanged(
            a1 in complex(), a2 in complex(), b1 in complex(), b2 in complex(),
            phi in 0.0..std::f64::consts::TAU,
        ) {
            let u = Complex64::from_polar(1.0, phi);
            let k0 = coefficients_from_lindblad(&LindbladCoefficients { a1, a2, b1, b2 }, 1.0).unwrap();
            let k1 = coefficients_from_lindblad(
                &LindbladCoefficients { a1: u * a1, a2: u * a2, b1: u * b1, b2: u * b2 }, 1.0).unwrap();
            prop_assert_eq!(check_complete_positivity(&k0, 1.0), check_complete_positivity(&k1, 1.0));
            prop_assert!((k0.lambda - k1.lambda).abs() < 1e-12);
            prop_assert!((k0.d_qp - k1.d_qp).abs() < 1e-12);
        }
    }
}
