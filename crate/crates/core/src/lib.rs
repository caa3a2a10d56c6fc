// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Gaussian-state dynamics of a damped harmonic oscillator under a quadratic
//! Lindblad master equation, symplectic tomography of those states, and
//! recovery of the master-equation coefficients from reconstructed cumulants.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod evolution;
pub mod inversion;
pub mod io;
pub mod model;
pub mod reconstruction;
pub mod special;
pub mod tomography;

pub use evolution::EvolutionError;
pub use inversion::InversionError;
pub use model::{CumulantState, MasterEqCoefficients, ModelError, PhysicalParams};
pub use reconstruction::ReconstructionError;
pub use tomography::TomographyError;
