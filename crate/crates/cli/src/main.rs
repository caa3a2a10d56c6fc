// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! `tomolab`: simulate, measure, reconstruct and invert Gaussian-state
//! dynamics from a JSON configuration.
//!
//! Exit codes: 0 ok, 1 i/o, 2 config, 3 physics precondition, 4 reconstruction failure.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "tomolab", version, about = "Gaussian-state tomography pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Base seed for noise streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run with coefficients that violate complete positivity.
    #[arg(long)]
    allow_noncp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the cumulant trajectory over the configured time grid.
    Simulate(Common),
    /// Write tomogram points, and a Wigner grid if configured, at time `t`.
    Tomogram(Common),
    /// Reconstruct the state from tomogram CSV files.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Tomogram CSV; repeat for several files.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Simulate, measure, reconstruct and invert; compare with the ground truth.
    Roundtrip(Common),
}

fn context(c: &Common) -> Result<Context, CliError> {
    Context::new(&c.config, c.out.clone(), c.seed, c.allow_noncp)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(c) => commands::simulate(&context(c)?),
        Command::Tomogram(c) => commands::tomogram(&context(c)?),
        Command::Reconstruct { common, inputs } => commands::reconstruct(&context(common)?, inputs),
        Command::Roundtrip(c) => commands::roundtrip(&context(c)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TOMOLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tomolab: {e}");
            if let CliError::Reconstruction { message, payload } = &e {
                let diag = serde_json::json!({ "error": message, "exit_code": e.exit_code(), "detail": payload });
                eprintln!("{diag}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
