// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Small numerically careful kernels shared by the propagators and the
//! reconstruction code.

use num_complex::Complex64;

/// `e^z − 1` for complex `z` without cancellation near the origin.
pub fn expm1_complex(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half_sin = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * half_sin * half_sin;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// `φ(a, t) = (1 − e^{−a t}) / a`, with `φ(0, t) = t`.
pub fn phi(a: Complex64, t: f64) -> Complex64 {
    let z = a * t;
    if z.norm() < 1e-3 {
        // Σ (−z)^n / (n+1)!; complex division would lose the small imaginary part
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..8 {
            term = term * (-z) / (n as f64 + 1.0);
            sum += term;
        }
        return t * sum;
    }
    -expm1_complex(-z) / a
}

/// Real version of [`phi`].
pub fn phi_real(a: f64, t: f64) -> f64 {
    let z = a * t;
    if z.abs() < 1e-8 {
        return t * (1.0 - 0.5 * z + z * z / 6.0);
    }
    -(-z).exp_m1() / a
}

/// `∫₀¹ u^k e^{−x u} du` for `k = 0..=K`, returned as an array.
pub fn unit_exp_moments<const K: usize>(x: f64) -> [f64; K] {
    let mut out = [0.0; K];
    if x.abs() <= 1.0 {
        for (k, slot) in out.iter_mut().enumerate() {
            // Σ (−x)^n / (n! (n + k + 1))
            let mut term = 1.0;
            let mut sum = 0.0;
            for n in 0..60 {
                if n > 0 {
                    term *= -x / n as f64;
                }
                let contrib = term / (n + k + 1) as f64;
                sum += contrib;
                if contrib.abs() < 1e-18 * sum.abs().max(1e-300) {
                    break;
                }
            }
            *slot = sum;
        }
    } else {
        let e = (-x).exp();
        let mut prev = -(-x).exp_m1() / x;
        for (k, slot) in out.iter_mut().enumerate() {
            if k > 0 {
                prev = (k as f64 * prev - e) / x;
            }
            *slot = prev;
        }
    }
    out
}

/// `∫₀ᵗ s^k e^{−a s} ds` for `k = 0..K`.
pub fn exp_moments<const K: usize>(a: f64, t: f64) -> [f64; K] {
    let mut m = unit_exp_moments::<K>(a * t);
    let mut tp = t;
    for v in m.iter_mut() {
        *v *= tp;
        tp *= t;
    }
    m
}

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Which real branch of the Lambert W function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambertBranch {
    /// `W_0`, `W ≥ −1`
    Principal,
    /// `W_{−1}`, `W ≤ −1`, defined on `[−1/e, 0)`
    Lower,
}

/// Real Lambert W, solving `w e^w = z` by Halley iteration.
///
/// Returns `None` outside the branch's domain.
pub fn lambert_w(z: f64, branch: LambertBranch) -> Option<f64> {
    if !z.is_finite() || z < -INV_E * (1.0 + 1e-15) {
        return None;
    }
    if z <= -INV_E {
        return Some(-1.0);
    }
    if branch == LambertBranch::Lower && z >= 0.0 {
        return None;
    }
    if z == 0.0 {
        return Some(0.0);
    }
    let p = (2.0 * (std::f64::consts::E * z + 1.0)).max(0.0).sqrt();
    let mut w = match branch {
        LambertBranch::Principal => {
            if z < -0.25 {
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else if z < 3.0 {
                // ln(1 + z) is within a factor of two over this range
                z.ln_1p() * (1.0 - 0.2 * z.ln_1p().min(1.0))
            } else {
                let l = z.ln();
                l - l.ln()
            }
        }
        LambertBranch::Lower => {
            if z < -0.25 {
                -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                let l = (-z).ln();
                l - (-l).ln()
            }
        }
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = w - step;
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(1.0);
        w = next;
        if done {
            break;
        }
    }
    Some(w)
}
