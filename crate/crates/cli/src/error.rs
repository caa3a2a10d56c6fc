// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use tomolab_core::evolution::EvolutionError;
use tomolab_core::inversion::InversionError;
use tomolab_core::io::IoError;
use tomolab_core::reconstruction::ReconstructionError;
use tomolab_core::tomography::TomographyError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("physics precondition failed: {0}")]
    Physics(String),
    #[error("reconstruction failed: {message}")]
    Reconstruction { message: String, payload: serde_json::Value },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Reconstruction { .. } => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn reconstruction(message: impl Into<String>, payload: serde_json::Value) -> Self {
        CliError::Reconstruction {
            message: message.into(),
            payload,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        CliError::Physics(e.to_string())
    }
}

impl From<TomographyError> for CliError {
    fn from(e: TomographyError) -> Self {
        CliError::Physics(e.to_string())
    }
}

impl From<ReconstructionError> for CliError {
    fn from(e: ReconstructionError) -> Self {
        let payload = serde_json::json!({ "kind": "reconstruction", "detail": format!("{e:?}") });
        CliError::reconstruction(e.to_string(), payload)
    }
}

impl From<InversionError> for CliError {
    fn from(e: InversionError) -> Self {
        match e {
            InversionError::Reconstruction(r) => r.into(),
            InversionError::NotParallel { angle, tol } => CliError::reconstruction(
                e.to_string(),
                serde_json::json!({ "kind": "not_parallel", "angle": angle, "angle_tol": tol }),
            ),
            InversionError::NonFiniteLambda => {
                CliError::reconstruction(e.to_string(), serde_json::json!({ "kind": "non_finite_lambda" }))
            }
            other => CliError::Physics(other.to_string()),
        }
    }
}
