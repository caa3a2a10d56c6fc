// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Time evolution of the five cumulants.
//!
//! First moments obey a damped 2×2 linear system, second moments a 3×3
//! inhomogeneous one. With `X = (mωΔq², Δp²/(mω), σ)` and
//! `D = (2mωD_qq, 2D_pp/(mω), 2D_qp)` the latter reads `dX/dt = M X + D`,
//! `M = −2λ + G`, where `G` has eigenvalues `0, ±2η`. The solution is
//!
//! ```text
//! X(t) = A(t) X(0) + B(t) D,   A = e^{Mt},   B = ∫₀ᵗ e^{Ms} ds.
//! ```
//!
//! Two algebraic routes are provided. [`SecondMomentPropagator`] writes `A`
//! and `B` as quadratic polynomials in `G` whose coefficients are even
//! functions of `η`, so it stays regular through `η = 0`. [`PropagatorMatrices`]
//! keeps the eigen-factorization `A = T e^{Kt} T`, `B = T K̃ T` with `T² = 1`,
//! which is singular at `η = 0` but gives `B⁻¹ = T K̃⁻¹ T` directly.
//! [`integrate_oracle`] integrates the raw ODEs with RK4 and shares no code
//! with either.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Covariance, CumulantState, MasterEqCoefficients, ModelError, PhysicalParams};
use crate::special::{exp_moments, phi, phi_real};

/// Default RK4 step for the oracle integrator.
pub const DEFAULT_ORACLE_DT: f64 = 1e-4;

/// Largest imaginary residue tolerated, relative to the matrix norm, when a
/// real matrix is formed from complex factors.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("oracle step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("closed-form second-moment propagation needs omega > 0; use the oracle integrator")]
    ZeroFrequency,
    #[error("eta = 0 makes the T factorization singular; use SecondMomentPropagator")]
    DegenerateEta,
    #[error("no stationary state: lambda = {lambda} must exceed max(Re eta, 0) = {threshold}")]
    NonContracting { lambda: f64, threshold: f64 },
    #[error("evolution overflowed (lambda*t too negative?)")]
    NonFinite,
    #[error("imaginary residue {0:e} exceeds tolerance")]
    ImaginaryResidue(f64),
    #[error("propagator is numerically singular")]
    Singular,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_time(t: f64) -> Result<(), EvolutionError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(EvolutionError::InvalidTime(t))
    }
}

/// `(cosh(ηt), sinh(ηt)/η)` for real `η²` of either sign.
///
/// Both are even in `η`, hence real; `|ηt| < 1e−6` uses the Taylor series
/// so that `η = 0` gives `(1, t)`.
pub(crate) fn cosh_and_sinhc(eta_sq: f64, t: f64) -> (f64, f64) {
    let h = eta_sq * t * t;
    if h.abs() < 1e-12 {
        return (1.0 + 0.5 * h, t * (1.0 + h / 6.0));
    }
    let eta = Complex64::new(eta_sq, 0.0).sqrt();
    let x = eta * t;
    (x.cosh().re, (x.sinh() / eta).re)
}

/// The λ-free 2×2 propagator of the first moments.
pub fn undamped_mean_propagator(p: &PhysicalParams, t: f64) -> [[f64; 2]; 2] {
    let (c, s) = cosh_and_sinhc(p.eta_squared(), t);
    [
        [c + p.delta * s, s / p.m],
        [-p.m * p.omega * p.omega * s, c - p.delta * s],
    ]
}

/// Propagates `(⟨q⟩, ⟨p⟩)` from time 0 to `t`.
pub fn evolve_means(
    p: &PhysicalParams,
    lambda: f64,
    q0: f64,
    p0: f64,
    t: f64,
) -> Result<(f64, f64), EvolutionError> {
    check_time(t)?;
    let m0 = undamped_mean_propagator(p, t);
    let damp = (-lambda * t).exp();
    let q = damp * (m0[0][0] * q0 + m0[0][1] * p0);
    let pp = damp * (m0[1][0] * q0 + m0[1][1] * p0);
    if q.is_finite() && pp.is_finite() {
        Ok((q, pp))
    } else {
        Err(EvolutionError::NonFinite)
    }
}

/// Second moments packed as `X = (mωΔq², Δp²/(mω), σ)`; all three carry units of action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVector(pub Vector3<f64>);

impl MomentVector {
    pub fn pack(p: &PhysicalParams, cov: &Covariance) -> Result<Self, EvolutionError> {
        let mw = mass_frequency(p)?;
        Ok(Self(Vector3::new(mw * cov.var_q, cov.var_p / mw, cov.cov_qp)))
    }

    pub fn unpack(&self, p: &PhysicalParams) -> Result<Covariance, EvolutionError> {
        let mw = mass_frequency(p)?;
        Ok(Covariance::new(self.0[0] / mw, self.0[1] * mw, self.0[2]))
    }

    /// Packs diffusion coefficients as `D = (2mωD_qq, 2D_pp/(mω), 2D_qp)`.
    pub fn pack_diffusion(p: &PhysicalParams, c: &MasterEqCoefficients) -> Result<Self, EvolutionError> {
        let mw = mass_frequency(p)?;
        Ok(Self(Vector3::new(2.0 * mw * c.d_qq, 2.0 * c.d_pp / mw, 2.0 * c.d_qp)))
    }

    /// Inverse of [`MomentVector::pack_diffusion`], returning `(D_qq, D_pp, D_qp)`.
    pub fn unpack_diffusion(&self, p: &PhysicalParams) -> Result<(f64, f64, f64), EvolutionError> {
        let mw = mass_frequency(p)?;
        Ok((self.0[0] / (2.0 * mw), 0.5 * self.0[1] * mw, 0.5 * self.0[2]))
    }
}

fn mass_frequency(p: &PhysicalParams) -> Result<f64, EvolutionError> {
    if p.omega > 0.0 {
        Ok(p.m * p.omega)
    } else {
        Err(EvolutionError::ZeroFrequency)
    }
}

/// The λ-free part `G` of the generator in packed coordinates.
pub fn coupling_generator(p: &PhysicalParams) -> Matrix3<f64> {
    let (d, w) = (p.delta, p.omega);
    Matrix3::new(
        2.0 * d, 0.0, 2.0 * w, //
        0.0, -2.0 * d, -2.0 * w, //
        -w, w, 0.0,
    )
}

/// `A(t) = e^{Mt}` and `B(t) = ∫₀ᵗ e^{Ms} ds` for the packed second moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMomentPropagator {
    pub homogeneous: Matrix3<f64>,
    pub integrated: Matrix3<f64>,
}

impl SecondMomentPropagator {
    pub fn new(p: &PhysicalParams, lambda: f64, t: f64) -> Result<Self, EvolutionError> {
        check_time(t)?;
        mass_frequency(p)?;
        let g = coupling_generator(p);
        let g2 = g * g;
        let eta_sq = p.eta_squared();
        let identity = Matrix3::identity();

        // e^{Gt} = 1 + sinh(2ηt)/(2η) G + (cosh(2ηt) − 1)/(4η²) G²
        let (_, s1) = cosh_and_sinhc(4.0 * eta_sq, t);
        let (_, s_half) = cosh_and_sinhc(eta_sq, t);
        let s2 = 0.5 * s_half * s_half;
        let homogeneous = (identity + g * s1 + g2 * s2) * (-2.0 * lambda * t).exp();

        let (b0, b1, b2) = integrated_coefficients(lambda, eta_sq, t);
        let integrated = identity * b0 + g * b1 + g2 * b2;

        if homogeneous.iter().chain(integrated.iter()).all(|v| v.is_finite()) {
            Ok(Self {
                homogeneous,
                integrated,
            })
        } else {
            Err(EvolutionError::NonFinite)
        }
    }

    pub fn apply(&self, x0: &MomentVector, d: &MomentVector) -> MomentVector {
        MomentVector(self.homogeneous * x0.0 + self.integrated * d.0)
    }
}

/// Coefficients of `B = b0 + b1 G + b2 G²`, i.e. `∫₀ᵗ e^{−2λs} f_k(s) ds` with
/// `f_0 = 1`, `f_1 = sinh(2ηs)/(2η)`, `f_2 = (cosh(2ηs) − 1)/(4η²)`.
fn integrated_coefficients(lambda: f64, eta_sq: f64, t: f64) -> (f64, f64, f64) {
    let a = 2.0 * lambda;
    let b0 = phi_real(a, t);
    let g_sq = 4.0 * eta_sq;
    if (g_sq * t * t).abs() < 1e-4 {
        let i = exp_moments::<7>(a, t);
        let b1 = i[1] + g_sq * i[3] / 6.0 + g_sq * g_sq * i[5] / 120.0;
        let b2 = i[2] / 2.0 + g_sq * i[4] / 24.0 + g_sq * g_sq * i[6] / 720.0;
        return (b0, b1, b2);
    }
    let g = Complex64::new(g_sq, 0.0).sqrt();
    let lower = phi(Complex64::new(a, 0.0) - g, t);
    let upper = phi(Complex64::new(a, 0.0) + g, t);
    let b1 = ((lower - upper) / (2.0 * g)).re;
    let b2 = ((lower + upper - 2.0 * b0) / (2.0 * g * g)).re;
    (b0, b1, b2)
}

/// Eigen-factorized propagator: `T`, `e^{Kt}`, `K̃ = K⁻¹(e^{Kt} − 1)` and `η`.
///
/// For `δ² < ω²` the factors are genuinely complex (`η = iΩ`); only the
/// conjugated products are real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorMatrices {
    pub t_mat: Matrix3<Complex64>,
    pub exp_kt: Matrix3<Complex64>,
    pub k_tilde: Matrix3<Complex64>,
    pub eta: Complex64,
}

pub fn propagator_matrices(
    p: &PhysicalParams,
    lambda: f64,
    t: f64,
) -> Result<PropagatorMatrices, EvolutionError> {
    check_time(t)?;
    mass_frequency(p)?;
    let eta = p.eta();
    if eta.norm() == 0.0 {
        return Err(EvolutionError::DegenerateEta);
    }
    let d = Complex64::new(p.delta, 0.0);
    let w = Complex64::new(p.omega, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let t_mat = Matrix3::new(
        d + eta, d - eta, two * w, //
        d - eta, d + eta, two * w, //
        -w, -w, -two * d,
    ) / (two * eta);
    let lam = Complex64::new(lambda, 0.0);
    let rates = [two * (lam - eta), two * (lam + eta), two * lam];
    let exp_kt = Matrix3::from_diagonal(&Vector3::from_iterator(rates.iter().map(|r| (-r * t).exp())));
    let k_tilde = Matrix3::from_diagonal(&Vector3::from_iterator(rates.iter().map(|&r| phi(r, t))));
    Ok(PropagatorMatrices {
        t_mat,
        exp_kt,
        k_tilde,
        eta,
    })
}

fn real_part(m: &Matrix3<Complex64>) -> Result<Matrix3<f64>, EvolutionError> {
    let re = m.map(|z| z.re);
    let norm = re.amax().max(f64::MIN_POSITIVE);
    let residue = m.map(|z| z.im).amax();
    if !re.iter().all(|v| v.is_finite()) {
        return Err(EvolutionError::NonFinite);
    }
    if residue > IMAGINARY_RESIDUE_TOL * norm {
        return Err(EvolutionError::ImaginaryResidue(residue / norm));
    }
    Ok(re)
}

impl PropagatorMatrices {
    /// `T e^{Kt} T`.
    pub fn homogeneous(&self) -> Result<Matrix3<f64>, EvolutionError> {
        real_part(&(self.t_mat * self.exp_kt * self.t_mat))
    }

    /// `T K̃ T`.
    pub fn integrated(&self) -> Result<Matrix3<f64>, EvolutionError> {
        real_part(&(self.t_mat * self.k_tilde * self.t_mat))
    }

    /// `T K̃⁻¹ T`, the inverse of [`PropagatorMatrices::integrated`].
    pub fn inverse_integrated(&self) -> Result<Matrix3<f64>, EvolutionError> {
        let diag = self.k_tilde.diagonal();
        let scale = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if diag.iter().any(|z| z.norm() <= 1e-13 * scale) || scale == 0.0 {
            return Err(EvolutionError::Singular);
        }
        let inv = Matrix3::from_diagonal(&diag.map(|z| Complex64::new(1.0, 0.0) / z));
        real_part(&(self.t_mat * inv * self.t_mat))
    }
}

/// Closed-form second cumulants at time `t` (requires `ω > 0`).
pub fn evolve_covariance(
    p: &PhysicalParams,
    c: &MasterEqCoefficients,
    s0: &CumulantState,
    t: f64,
) -> Result<Covariance, EvolutionError> {
    let prop = SecondMomentPropagator::new(p, c.lambda, t)?;
    let x0 = MomentVector::pack(p, &s0.covariance())?;
    let d = MomentVector::pack_diffusion(p, c)?;
    let cov = prop.apply(&x0, &d).unpack(p)?;
    if cov.det() > 0.0 {
        Ok(cov)
    } else {
        Err(EvolutionError::Model(ModelError::NonPositiveDeterminant(cov.det())))
    }
}

/// All five cumulants at time `t`: closed form for `ω > 0`, RK4 oracle with
/// [`DEFAULT_ORACLE_DT`] for `ω = 0`.
pub fn evolve_state(
    p: &PhysicalParams,
    c: &MasterEqCoefficients,
    s0: &CumulantState,
    t: f64,
) -> Result<CumulantState, EvolutionError> {
    if p.omega > 0.0 {
        let means = evolve_means(p, c.lambda, s0.mean_q, s0.mean_p, t)?;
        let cov = evolve_covariance(p, c, s0, t)?;
        Ok(CumulantState::from_parts(means, cov)?)
    } else {
        integrate_oracle(p, c, s0, t, DEFAULT_ORACLE_DT)
    }
}

/// Fixed point of the second-moment equations.
pub fn stationary_covariance(
    p: &PhysicalParams,
    c: &MasterEqCoefficients,
) -> Result<Covariance, EvolutionError> {
    let threshold = p.contraction_threshold();
    if !(c.lambda > threshold) {
        return Err(EvolutionError::NonContracting {
            lambda: c.lambda,
            threshold,
        });
    }
    let (m, w2, l, d) = (p.m, p.omega * p.omega, c.lambda, p.delta);
    // Right-hand side of the second-moment ODE set to zero, unknowns (Δq², Δp², σ).
    let lhs = Matrix3::new(
        -2.0 * (l - d), 0.0, 2.0 / m, //
        0.0, -2.0 * (l + d), -2.0 * m * w2, //
        -m * w2, 1.0 / m, -2.0 * l,
    );
    let rhs = Vector3::new(-2.0 * c.d_qq, -2.0 * c.d_pp, -2.0 * c.d_qp);
    let sol = lhs.lu().solve(&rhs).ok_or(EvolutionError::Singular)?;
    Ok(Covariance::new(sol[0], sol[1], sol[2]))
}

fn oracle_rhs(p: &PhysicalParams, c: &MasterEqCoefficients, y: &[f64; 5]) -> [f64; 5] {
    let (m, w2, l, d) = (p.m, p.omega * p.omega, c.lambda, p.delta);
    let [q, pm, vq, vp, s] = *y;
    [
        -(l - d) * q + pm / m,
        -m * w2 * q - (l + d) * pm,
        -2.0 * (l - d) * vq + 2.0 / m * s + 2.0 * c.d_qq,
        -2.0 * (l + d) * vp - 2.0 * m * w2 * s + 2.0 * c.d_pp,
        -m * w2 * vq + vp / m - 2.0 * l * s + 2.0 * c.d_qp,
    ]
}

/// Classical RK4 on the five raw cumulant ODEs.
///
/// The step is shrunk so that an integer number of steps lands exactly on `t`.
pub fn integrate_oracle(
    p: &PhysicalParams,
    c: &MasterEqCoefficients,
    s0: &CumulantState,
    t: f64,
    dt: f64,
) -> Result<CumulantState, EvolutionError> {
    check_time(t)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(EvolutionError::InvalidStep(dt));
    }
    let mut y = [s0.mean_q, s0.mean_p, s0.var_q, s0.var_p, s0.cov_qp];
    if t > 0.0 {
        let steps = (t / dt).ceil().max(1.0) as u64;
        let h = t / steps as f64;
        let axpy = |y: &[f64; 5], k: &[f64; 5], a: f64| std::array::from_fn::<f64, 5, _>(|i| y[i] + a * k[i]);
        for _ in 0..steps {
            let k1 = oracle_rhs(p, c, &y);
            let k2 = oracle_rhs(p, c, &axpy(&y, &k1, 0.5 * h));
            let k3 = oracle_rhs(p, c, &axpy(&y, &k2, 0.5 * h));
            let k4 = oracle_rhs(p, c, &axpy(&y, &k3, h));
            for i in 0..5 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(EvolutionError::NonFinite);
    }
    Ok(CumulantState::new(y[0], y[1], y[2], y[3], y[4])?)
}
