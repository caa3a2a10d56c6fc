// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use tomolab_core::evolution::{evolve_state, integrate_oracle, DEFAULT_ORACLE_DT};
use tomolab_core::inversion::{estimate_all, estimate_stationary, stationary_state, EstimateReport, EstimationOptions};
use tomolab_core::io::{self, fmt_f64, TrajectoryRow, WignerOrder, WignerSidecar};
use tomolab_core::model::{check_complete_positivity, CpVerdict, CumulantState, MasterEqCoefficients};
use tomolab_core::reconstruction::{
    default_layout, measure_layout, reconstruct_from_points, MarginalEstimate, ReconstructionOptions, StatePoints,
};
use tomolab_core::tomography::{
    make_rescaling, rescale_state, sample_tomogram, unscale_state, wigner_grid, NoiseModel, Rescaling, TomogramPoint,
};

use crate::config::{Config, EstimationMode, NoiseLevel};
use crate::error::CliError;

pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub allow_noncp: bool,
}

impl Context {
    pub fn new(config_path: &Path, out: PathBuf, seed: u64, allow_noncp: bool) -> Result<Self, CliError> {
        let config = Config::load(config_path)?;
        std::fs::create_dir_all(&out)?;
        Ok(Self {
            config,
            out,
            seed,
            allow_noncp,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        info!("writing {}", path.display());
        Ok(BufWriter::new(File::create(path)?))
    }

    /// Ground truth, refused when it violates complete positivity unless allowed.
    fn truth(&self) -> Result<MasterEqCoefficients, CliError> {
        let c = self.config.truth()?;
        if let CpVerdict::Violated(constraint) = check_complete_positivity(&c, self.config.physical.hbar) {
            if self.allow_noncp {
                warn!("coefficients violate complete positivity ({constraint:?}); continuing");
            } else {
                return Err(CliError::Physics(format!(
                    "coefficients violate complete positivity ({constraint:?}); pass --allow-noncp to run anyway"
                )));
            }
        }
        Ok(c)
    }

    fn rescaling(&self) -> Result<Rescaling, CliError> {
        Ok(make_rescaling(&self.config.physical, Some(self.config.initial_state.var_p))?)
    }

    fn state_at(&self, c: &MasterEqCoefficients, t: f64) -> Result<CumulantState, CliError> {
        let cfg = &self.config;
        if cfg.physical.omega > 0.0 {
            Ok(evolve_state(&cfg.physical, c, &cfg.initial_state, t)?)
        } else {
            let dt = cfg.time.dt.unwrap_or(DEFAULT_ORACLE_DT);
            Ok(integrate_oracle(&cfg.physical, c, &cfg.initial_state, t, dt)?)
        }
    }

    fn estimation_options(&self) -> EstimationOptions {
        let cfg = &self.config;
        let defaults = ReconstructionOptions::default();
        EstimationOptions {
            reconstruction: ReconstructionOptions {
                noisy_match_tol: cfg.noise.match_tol.unwrap_or(defaults.noisy_match_tol),
                ..defaults
            },
            lambda_method: cfg.estimation.lambda_method,
            angle_tol: cfg
                .noise
                .angle_tol
                .unwrap_or(if cfg.is_noisy() { 0.1 } else { 1e-6 }),
            ..EstimationOptions::default()
        }
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let c = ctx.truth()?;
    let rows = ctx
        .config
        .time
        .grid_values()
        .into_iter()
        .map(|t| Ok(TrajectoryRow { t, state: ctx.state_at(&c, t)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut w = ctx.create(&ctx.config.output.trajectory)?;
    io::write_trajectory(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

fn line_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn tomogram(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let state = if cfg.time.t == 0.0 {
        cfg.initial_state
    } else {
        ctx.state_at(&ctx.truth()?, cfg.time.t)?
    };
    let scaled = rescale_state(&state, &ctx.rescaling()?);
    let levels = cfg.noise_levels()?;
    if levels.len() > 1 {
        warn!("tomogram uses only the first noise level (sigma = {})", levels[0].sigma);
    }
    let noise = levels[0].model;
    let points: Vec<TomogramPoint> = if cfg.tomography.lines.is_empty() {
        let layout = default_layout(&scaled, cfg.tomography.sign_hints);
        measure_layout(&scaled, &layout, &noise, ctx.seed)?.all()
    } else {
        let mut pts = Vec::new();
        for (i, req) in cfg.tomography.lines.iter().enumerate() {
            pts.extend(sample_tomogram(&scaled, &req.line()?, &req.positions(), &noise, line_seed(ctx.seed, i))?);
        }
        pts
    };
    let mut w = ctx.create(&cfg.output.tomogram)?;
    io::write_tomogram(&mut w, &points)?;
    w.flush()?;

    if let Some(grid) = cfg.tomography.wigner {
        let values = wigner_grid(&scaled, &grid)?;
        let mut w = ctx.create(&cfg.output.wigner)?;
        io::write_wigner(&mut w, &values)?;
        w.flush()?;
        let side = WignerSidecar {
            grid,
            order: WignerOrder::QOuterPInner,
            state: scaled,
        };
        io::write_json(ctx.create(&cfg.output.wigner_meta)?, &side)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SignResolved {
    q: bool,
    p: bool,
}

#[derive(Debug, Serialize)]
struct ReconstructionResiduals {
    q: f64,
    p: f64,
    covariance: f64,
}

#[derive(Debug, Serialize)]
struct ReconstructionReport {
    /// Physical units.
    state: CumulantState,
    state_rescaled: CumulantState,
    residuals: ReconstructionResiduals,
    points_used: usize,
    sign_resolved: SignResolved,
    q: MarginalEstimate,
    p: MarginalEstimate,
}

fn read_points(inputs: &[PathBuf]) -> Result<Vec<TomogramPoint>, CliError> {
    let mut all = Vec::new();
    for path in inputs {
        let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
        let pts = io::read_tomogram(BufReader::new(file)).map_err(|e| {
            CliError::reconstruction(
                format!("{}: {e}", path.display()),
                serde_json::json!({ "kind": "malformed_input", "file": path.display().to_string(), "detail": e.to_string() }),
            )
        })?;
        for (i, p) in pts.iter().enumerate() {
            if !(p.value > 0.0) {
                return Err(CliError::reconstruction(
                    format!("{} row {}: density {} is not positive", path.display(), i + 1, p.value),
                    serde_json::json!({
                        "kind": "invalid_density",
                        "file": path.display().to_string(),
                        "row": i + 1,
                        "x": p.x,
                        "mu": p.line.mu,
                        "nu": p.line.nu,
                        "value": p.value,
                    }),
                ));
            }
        }
        all.extend(pts);
    }
    Ok(all)
}

pub fn reconstruct(ctx: &Context, inputs: &[PathBuf]) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let points = StatePoints::from_points(&read_points(inputs)?)?;
    let opts = ctx.estimation_options().reconstruction;
    let rec = reconstruct_from_points(&points, cfg.tomography.sign_hints, &opts)?;
    let report = ReconstructionReport {
        state: unscale_state(&rec.state, &ctx.rescaling()?),
        state_rescaled: rec.state,
        residuals: ReconstructionResiduals {
            q: rec.q.residual,
            p: rec.p.residual,
            covariance: rec.covariance.residual,
        },
        points_used: rec.points_used,
        sign_resolved: SignResolved {
            q: rec.q.sign_resolved,
            p: rec.p.sign_resolved,
        },
        q: rec.q,
        p: rec.p,
    };
    io::write_json(ctx.create(&cfg.output.reconstruction)?, &report)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunRecord {
    sigma: f64,
    seed: u64,
    estimate: Option<EstimateReport>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SigmaSummary {
    sigma: f64,
    runs: usize,
    failures: usize,
    /// Median over runs of the largest per-coefficient relative error; failed
    /// runs count as infinite, and an infinite median is written as null.
    median_max_rel_error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RoundtripReport {
    truth: MasterEqCoefficients,
    mode: &'static str,
    t: f64,
    runs: Vec<RunRecord>,
    summary: Vec<SigmaSummary>,
}

const COEFFICIENTS: [&str; 4] = ["lambda", "d_qq", "d_pp", "d_qp"];

fn coefficient_values(c: &MasterEqCoefficients) -> [f64; 4] {
    [c.lambda, c.d_qq, c.d_pp, c.d_qp]
}

fn rel_error(estimate: f64, truth: f64) -> f64 {
    let err = (estimate - truth).abs();
    if truth == 0.0 {
        err
    } else {
        err / truth.abs()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run_once(
    ctx: &Context,
    c: &MasterEqCoefficients,
    level: &NoiseModel,
    seed: u64,
    opts: &EstimationOptions,
) -> Result<EstimateReport, CliError> {
    let cfg = &ctx.config;
    let p = &cfg.physical;
    let t = cfg.time.t;
    let hints = cfg.tomography.sign_hints;
    let resc = ctx.rescaling()?;
    let scaled = rescale_state(&ctx.state_at(c, t)?, &resc);
    let pts = measure_layout(&scaled, &default_layout(&scaled, hints), level, seed)?;
    match cfg.estimation.mode {
        EstimationMode::FiniteTime => Ok(estimate_all(p, &cfg.initial_state, &pts, t, hints, opts)?),
        EstimationMode::Stationary => {
            let inf = rescale_state(&stationary_state(p, c)?, &resc);
            let layout = default_layout(&inf, Default::default());
            let pts_inf = measure_layout(&inf, &layout, level, line_seed(seed, 99))?;
            Ok(estimate_stationary(p, &cfg.initial_state, &pts, &pts_inf, t, hints, opts)?)
        }
    }
}

pub fn roundtrip(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let c = ctx.truth()?;
    if !(cfg.time.t > 0.0) {
        return Err(CliError::Config("roundtrip needs time.t > 0".into()));
    }
    if cfg.estimation.mode == EstimationMode::Stationary {
        let threshold = cfg.physical.contraction_threshold();
        if !(c.lambda > threshold) {
            return Err(CliError::Physics(format!(
                "stationary estimation needs lambda > {threshold} for a fixed point, got {}",
                c.lambda
            )));
        }
    }
    let levels: Vec<NoiseLevel> = cfg.noise_levels()?;
    let seeds = if cfg.is_noisy() {
        cfg.seeds(ctx.seed)
    } else {
        vec![ctx.seed]
    };
    let jobs: Vec<(NoiseLevel, u64)> =
        levels.iter().flat_map(|l| seeds.iter().map(move |&s| (*l, s))).collect();
    let opts = ctx.estimation_options();
    info!("running {} pipelines", jobs.len());
    let results: Vec<Result<EstimateReport, CliError>> =
        jobs.par_iter().map(|(level, seed)| run_once(ctx, &c, &level.model, *seed, &opts)).collect();

    let truth = coefficient_values(&c);
    let mut table = ctx.create(&cfg.output.errors)?;
    writeln!(table, "sigma,seed,coefficient,truth,estimate,rel_error,status")?;
    let mut runs = Vec::with_capacity(jobs.len());
    for ((level, seed), res) in jobs.iter().zip(&results) {
        match res {
            Ok(rep) => {
                if !rep.cp_verdict.is_satisfied() {
                    warn!("sigma={} seed={seed}: estimate violates complete positivity ({:?})", level.sigma, rep.cp_verdict);
                }
                for ((name, t), e) in COEFFICIENTS.iter().zip(truth).zip(coefficient_values(&rep.coefficients())) {
                    writeln!(
                        table,
                        "{},{seed},{name},{},{},{},ok",
                        fmt_f64(level.sigma),
                        fmt_f64(t),
                        fmt_f64(e),
                        fmt_f64(rel_error(e, t))
                    )?;
                }
            }
            Err(err) => {
                warn!("sigma={} seed={seed}: {err}", level.sigma);
                for (name, t) in COEFFICIENTS.iter().zip(truth) {
                    writeln!(table, "{},{seed},{name},{},,,failed", fmt_f64(level.sigma), fmt_f64(t))?;
                }
            }
        }
        runs.push(RunRecord {
            sigma: level.sigma,
            seed: *seed,
            estimate: res.as_ref().ok().copied(),
            error: res.as_ref().err().map(|e| e.to_string()),
        });
    }
    table.flush()?;

    let summary = levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let slice = &results[i * seeds.len()..(i + 1) * seeds.len()];
            let errs: Vec<f64> = slice
                .iter()
                .map(|r| match r {
                    Ok(rep) => truth
                        .iter()
                        .zip(coefficient_values(&rep.coefficients()))
                        .map(|(t, e)| rel_error(e, *t))
                        .fold(0.0, f64::max),
                    Err(_) => f64::INFINITY,
                })
                .collect();
            let m = median(errs);
            SigmaSummary {
                sigma: level.sigma,
                runs: slice.len(),
                failures: slice.iter().filter(|r| r.is_err()).count(),
                median_max_rel_error: m.is_finite().then_some(m),
            }
        })
        .collect();
    let report = RoundtripReport {
        truth: c,
        mode: match cfg.estimation.mode {
            EstimationMode::FiniteTime => "finite_time",
            EstimationMode::Stationary => "stationary",
        },
        t: cfg.time.t,
        runs,
        summary,
    };
    io::write_json(ctx.create(&cfg.output.estimate)?, &report)?;

    if results.iter().all(Result::is_err) {
        let first = results.into_iter().find_map(Result::err).expect("at least one run");
        return Err(first);
    }
    Ok(())
}
