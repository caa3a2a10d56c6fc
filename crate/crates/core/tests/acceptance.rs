// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tomolab_core::evolution::{
    evolve_covariance, evolve_state, integrate_oracle, propagator_matrices, stationary_covariance, DEFAULT_ORACLE_DT,
};
use tomolab_core::inversion::{
    diffusion_from_covariances, diffusion_from_stationary, estimate_all, EstimateReport, EstimationOptions,
};
use tomolab_core::model::{
    check_complete_positivity, coefficients_from_lindblad, CumulantState, LindbladCoefficients, MasterEqCoefficients,
    PhysicalParams,
};
use tomolab_core::reconstruction::{
    default_layout, measure_layout, reconstruct_state_time_dependent, spread_candidates, time_dependent_tomograms,
    Sign, SignHint, SignHints,
};
use tomolab_core::tomography::{make_rescaling, radon_gaussian, rescale_state, wigner_peak, NoiseModel, TomographyLine};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_physical(r: &mut ChaCha8Rng) -> PhysicalParams {
    PhysicalParams::new(r.random_range(0.5..2.0), r.random_range(0.5..2.0), r.random_range(-0.5..0.5), 1.0).unwrap()
}

fn random_lindblad(r: &mut ChaCha8Rng) -> MasterEqCoefficients {
    let mut c = || Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let lc = LindbladCoefficients {
        a1: c(),
        a2: c(),
        b1: c(),
        b2: c(),
    };
    coefficients_from_lindblad(&lc, 1.0).unwrap()
}

/// Physical state (`det ≥ 1/4`) with means bounded away from zero.
fn random_state(r: &mut ChaCha8Rng) -> CumulantState {
    let mean = |r: &mut ChaCha8Rng| {
        let v: f64 = r.random_range(0.5..3.0);
        if r.random_bool(0.5) {
            v
        } else {
            -v
        }
    };
    let q = mean(r);
    let p = mean(r);
    let vq: f64 = r.random_range(0.5..2.0);
    let vp: f64 = r.random_range(0.5..2.0);
    let max_rho = (1.0 - 0.25 / (vq * vp)).max(0.0).sqrt();
    let rho = r.random_range(-0.95..0.95) * max_rho;
    CumulantState::new(q, p, vq, vp, rho * (vq * vp).sqrt()).unwrap()
}

fn state_rel_error(a: &CumulantState, b: &CumulantState) -> f64 {
    let mean_scale = b.mean_q.hypot(b.mean_p);
    let cov_scale = b.var_q.max(b.var_p);
    let means = (a.mean_q - b.mean_q).abs().max((a.mean_p - b.mean_p).abs()) / mean_scale;
    let cov = [(a.var_q, b.var_q), (a.var_p, b.var_p), (a.cov_qp, b.cov_qp)]
        .iter()
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / cov_scale;
    means.max(cov)
}

fn coeff_vec(c: &MasterEqCoefficients) -> [f64; 4] {
    [c.lambda, c.d_qq, c.d_pp, c.d_qp]
}

/// `max |a − b| / max |b|` over a group of values sharing units.
fn group_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn max_per_coefficient_rel(a: &MasterEqCoefficients, b: &MasterEqCoefficients) -> f64 {
    coeff_vec(a)
        .iter()
        .zip(coeff_vec(b))
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

type Criterion = (&'static str, fn() -> Outcome);

#[allow(clippy::too_many_arguments)]
fn pipeline(
    p: &PhysicalParams,
    c: &MasterEqCoefficients,
    s0: &CumulantState,
    t: f64,
    hints: SignHints,
    noise: &NoiseModel,
    seed: u64,
    opts: &EstimationOptions,
) -> Result<EstimateReport, String> {
    let st = evolve_state(p, c, s0, t).map_err(|e| e.to_string())?;
    let resc = make_rescaling(p, Some(s0.var_p)).map_err(|e| e.to_string())?;
    let scaled = rescale_state(&st, &resc);
    let layout = default_layout(&scaled, hints);
    let pts = measure_layout(&scaled, &layout, noise, seed).map_err(|e| e.to_string())?;
    estimate_all(p, s0, &pts, t, hints, opts).map_err(|e| e.to_string())
}

fn known_hints(s: &CumulantState) -> SignHints {
    SignHints {
        q: SignHint::from_value(s.mean_q),
        p: SignHint::from_value(s.mean_p),
    }
}

fn reference() -> (PhysicalParams, MasterEqCoefficients, CumulantState) {
    (
        PhysicalParams::new(1.0, 1.0, 0.3, 1.0).unwrap(),
        MasterEqCoefficients::new(0.5, 0.6, 0.8, 0.1).unwrap(),
        CumulantState::new(3.0, 0.0, 1.0, 1.0, 0.0).unwrap(),
    )
}

fn criterion_1() -> Outcome {
    let (p, c, s0) = reference();
    let start = Instant::now();
    let r = pipeline(&p, &c, &s0, 1.0, SignHints::UNKNOWN, &NoiseModel::Exact, 0, &EstimationOptions::default())?;
    let elapsed = start.elapsed().as_secs_f64();
    let err = max_per_coefficient_rel(&r.coefficients(), &c);
    let detail = format!("points={} max rel err={err:.3e} runtime={elapsed:.3}s", r.points_used);
    if r.points_used == 10 && err <= 1e-6 && elapsed < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let (p, c, s0) = reference();
    let st = evolve_state(&p, &c, &s0, 1.0).map_err(|e| e.to_string())?;
    let both = known_hints(&st);
    let mut counts = Vec::new();
    for hints in [both, SignHints { p: SignHint::Unknown, ..both }, SignHints::UNKNOWN] {
        let r = pipeline(&p, &c, &s0, 1.0, hints, &NoiseModel::Exact, 0, &EstimationOptions::default())?;
        counts.push(r.points_used);
    }
    let detail = format!("known={} one unknown={} unknown={}", counts[0], counts[1], counts[2]);
    if counts == [8, 9, 10] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_physical(&mut r);
        let c = random_lindblad(&mut r);
        let s0 = random_state(&mut r);
        let mut oracle = s0;
        for k in 0..=50 {
            let t = 0.1 * k as f64;
            if k > 0 {
                oracle = integrate_oracle(&p, &c, &oracle, 0.1, DEFAULT_ORACLE_DT).map_err(|e| e.to_string())?;
            }
            let closed = evolve_state(&p, &c, &s0, t).map_err(|e| e.to_string())?;
            worst = worst.max(state_rel_error(&closed, &oracle));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let detail = format!("50 draws, max rel dev={worst:.3e} runtime={elapsed:.2}s");
    if worst <= 1e-6 && elapsed < 30.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4() -> Outcome {
    let gauss = |x: f64| (-(x - 3.0f64).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
    let w0 = gauss(0.0);
    let c1 = spread_candidates(4.5, gauss(4.5), w0, Sign::Plus, 512).map_err(|e| e.to_string())?;
    let c2 = spread_candidates(2.5, gauss(2.5), w0, Sign::Plus, 512).map_err(|e| e.to_string())?;
    let mut common = Vec::new();
    for a in &c1 {
        for b in &c2 {
            let gap = (a - b).abs() / a.max(*b);
            if gap < 1e-6 {
                common.push((*a, gap));
            }
        }
    }
    let detail = format!("X1 roots={c1:?} X2 roots={c2:?} common(root, gap)={common:?}");
    if c1.len() == 2 && common.len() == 1 && (common[0].0 - 1.0).abs() < 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for &(vq, vp, sign) in &[(1.0, 1.0, 1.0), (2.0, 0.5, -1.0), (0.3, 4.0, 1.0), (1.7, 1.7, -1.0)] {
        let s = CumulantState::new(0.4, -0.2, vq, vp, sign * 0.6 * (vq * vp).sqrt()).unwrap();
        let want = 1.0 / (2.0 * PI * 0.8 * (vq * vp).sqrt());
        let got = wigner_peak(&s).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs() / want);
    }
    let detail = format!("max rel dev={worst:.3e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn criterion_6() -> Outcome {
    const CASES: usize = 1000;
    let mut notes = Vec::new();
    let mut failed = Vec::new();

    let mut r = rng(61);
    let mut worst = 0.0f64;
    for _ in 0..CASES {
        let s = random_state(&mut r);
        let line = TomographyLine::new(r.random_range(-2.0..2.0), r.random_range(0.1..2.0)).unwrap();
        let x: f64 = r.random_range(-4.0..4.0);
        let c: f64 = r.random_range(0.1..10.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let scaled = TomographyLine::new(c * line.mu, c * line.nu).unwrap();
        let a = radon_gaussian(&s, c * x, &scaled).unwrap();
        let b = radon_gaussian(&s, x, &line).unwrap() / c.abs();
        worst = worst.max((a - b).abs() / b.max(f64::MIN_POSITIVE));
    }
    notes.push(format!("homogeneity {worst:.1e}"));
    if worst > 1e-12 {
        failed.push("homogeneity");
    }

    let mut r = rng(62);
    let mut worst = 0.0f64;
    for _ in 0..CASES {
        let s = random_state(&mut r);
        let line = TomographyLine::new(r.random_range(-2.0..2.0), r.random_range(0.1..2.0)).unwrap();
        let m = line.line_mean(&s);
        let sd = line.line_variance(&s).sqrt();
        let total = simpson(|x| radon_gaussian(&s, x, &line).unwrap(), m - 12.0 * sd, m + 12.0 * sd, 2000);
        worst = worst.max((total - 1.0).abs());
    }
    notes.push(format!("normalisation {worst:.1e}"));
    if worst > 1e-9 {
        failed.push("normalisation");
    }

    let mut r = rng(63);
    let violations = (0..CASES)
        .filter(|_| !check_complete_positivity(&random_lindblad(&mut r), 1e0).is_satisfied())
        .count();
    notes.push(format!("lindblad cp violations {violations}"));
    if violations > 0 {
        failed.push("lindblad cp");
    }

    let mut r = rng(64);
    let mut min_slack = f64::INFINITY;
    for _ in 0..CASES {
        let p = random_physical(&mut r);
        let c = random_lindblad(&mut r);
        let s0 = random_state(&mut r);
        for t in [0.3, 1.0, 2.5] {
            let cov = evolve_covariance(&p, &c, &s0, t).unwrap();
            min_slack = min_slack.min(cov.det() - 0.25);
        }
    }
    notes.push(format!("robertson-schroedinger min slack {min_slack:.1e}"));
    if min_slack < -1e-10 {
        failed.push("robertson-schroedinger");
    }

    let mut r = rng(65);
    let mut worst = 0.0f64;
    for _ in 0..CASES {
        let p = random_physical(&mut r);
        if p.eta_squared().abs() < 1e-6 {
            continue;
        }
        let m = propagator_matrices(&p, r.random_range(0.0..1.0), r.random_range(0.1..3.0)).unwrap();
        let sq = m.t_mat * m.t_mat;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((sq[(i, j)] - Complex64::new(want, 0.0)).norm());
            }
        }
    }
    notes.push(format!("T^2=I {worst:.1e}"));
    if worst > 1e-12 {
        failed.push("T^2");
    }

    let mut r = rng(66);
    let mut worst = 0.0f64;
    let mut errors = 0;
    let opts = EstimationOptions::default();
    for _ in 0..CASES {
        let p = random_physical(&mut r);
        let c = random_lindblad(&mut r);
        let s0 = random_state(&mut r);
        let mut est = Vec::new();
        for t in [0.5, 1.0, 2.0] {
            let st = evolve_state(&p, &c, &s0, t).unwrap();
            match pipeline(&p, &c, &s0, t, known_hints(&st), &NoiseModel::Exact, 0, &opts) {
                Ok(rep) => est.push(coeff_vec(&rep.coefficients())),
                Err(_) => errors += 1,
            }
        }
        if est.len() == 3 {
            worst = worst.max(group_rel(&est[0], &est[1])).max(group_rel(&est[2], &est[1]));
        }
    }
    notes.push(format!("t-independence {worst:.1e} ({errors} pipeline errors)"));
    if worst > 1e-8 || errors > 0 {
        failed.push("t-independence");
    }

    let detail = format!("{CASES} cases each: {}", notes.join(", "));
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", failed.join(", ")))
    }
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let (mut worst_cov, mut worst_stat) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = random_physical(&mut r);
        let c = random_lindblad(&mut r);
        let s0 = random_state(&mut r);
        let t = r.random_range(0.1..3.0);
        let ct = evolve_covariance(&p, &c, &s0, t).map_err(|e| e.to_string())?;
        let d = diffusion_from_covariances(&p, c.lambda, &s0.covariance(), &ct, t).map_err(|e| e.to_string())?;
        let truth = [c.d_qq, c.d_pp, c.d_qp];
        worst_cov = worst_cov.max(group_rel(&[d.d_qq, d.d_pp, d.d_qp], &truth));

        let lambda = p.contraction_threshold() + r.random_range(0.05..1.0);
        let cs = MasterEqCoefficients { lambda, ..c };
        let inf = stationary_covariance(&p, &cs).map_err(|e| e.to_string())?;
        let d = diffusion_from_stationary(&p, lambda, &inf).map_err(|e| e.to_string())?;
        worst_stat = worst_stat.max(group_rel(&[d.d_qq, d.d_pp, d.d_qp], &truth));
    }
    let detail = format!("100 draws: finite-time {worst_cov:.2e}, stationary {worst_stat:.2e}");
    if worst_cov <= 1e-9 && worst_stat <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = random_state(&mut r);
        let [w1, w2, w3] = time_dependent_tomograms(&s).map_err(|e| e.to_string())?;
        let back = reconstruct_state_time_dependent(w1, w2, w3, s.mean_q, s.mean_p).map_err(|e| e.to_string())?;
        worst = worst.max(group_rel(&[back.var_q, back.var_p, back.cov_qp], &[s.var_q, s.var_p, s.cov_qp]));
    }
    let detail = format!("100 states: max rel dev={worst:.2e}");
    if worst <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let c = MasterEqCoefficients::new(0.9, 0.6, 0.8, 0.1).unwrap();
    let s0 = CumulantState::new(1.5, -0.5, 1.0, 1.2, 0.2).unwrap();
    let (mut oracle_dev, mut cont_dev) = (0.0f64, 0.0f64);
    for &omega in &[0.5, 1.0, 1.7] {
        let p = PhysicalParams::new(1.0, omega, omega, 1.0).unwrap();
        let near = [omega - 1e-6, omega + 1e-6].map(|d| PhysicalParams::new(1.0, omega, d, 1.0).unwrap());
        let mut oracle = s0;
        for k in 0..=50 {
            let t = 0.1 * k as f64;
            if k > 0 {
                oracle = integrate_oracle(&p, &c, &oracle, 0.1, DEFAULT_ORACLE_DT).map_err(|e| e.to_string())?;
            }
            let closed = evolve_state(&p, &c, &s0, t).map_err(|e| e.to_string())?;
            oracle_dev = oracle_dev.max(state_rel_error(&closed, &oracle));
            for q in &near {
                let other = evolve_state(q, &c, &s0, t).map_err(|e| e.to_string())?;
                cont_dev = cont_dev.max(state_rel_error(&other, &closed));
            }
        }
    }
    let detail = format!("oracle dev={oracle_dev:.2e}, continuity dev={cont_dev:.2e}");
    if oracle_dev <= 1e-6 && cont_dev <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
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

fn criterion_10() -> Outcome {
    let (p, c, s0) = reference();
    let opts = EstimationOptions {
        angle_tol: 0.1,
        ..EstimationOptions::default()
    };
    let mut medians = Vec::new();
    let mut failures = Vec::new();
    for sigma in [1e-6, 1e-4, 1e-2] {
        let noise = NoiseModel::Additive { sigma };
        let errs: Vec<f64> = (0..100u64)
            .map(|seed| {
                pipeline(&p, &c, &s0, 1.0, SignHints::UNKNOWN, &noise, seed, &opts)
                    .map(|r| max_per_coefficient_rel(&r.coefficients(), &c))
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        failures.push(errs.iter().filter(|e| e.is_infinite()).count());
        medians.push(median(errs));
    }
    let shown: Vec<String> = medians.iter().map(|m| format!("{m:.3e}")).collect();
    let detail = format!("sigma=[1e-6, 1e-4, 1e-2] medians={shown:?} failed runs={failures:?}");
    if medians.windows(2).all(|w| w[0] <= w[1]) && medians[0].is_finite() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("noiseless ten-point round trip", criterion_1),
        ("point-count contract", criterion_2),
        ("closed form vs RK4 oracle", criterion_3),
        ("two-root intersection scenario", criterion_4),
        ("Wigner peak at det = 0.64 dq^2 dp^2", criterion_5),
        ("property suites", criterion_6),
        ("inverse-pair identities", criterion_7),
        ("time-dependent three-point procedure", criterion_8),
        ("degenerate eta = 0 branch", criterion_9),
        ("noise monotonicity", criterion_10),
    ];
    let mut all_ok = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                all_ok = false;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
