//! Runs every acceptance criterion and prints one line per criterion.
//! Exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, SQRT_2};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lgkac::correlations::{correlate_ensemble, cross_moment_ensemble, lg_from_trials, lg_scan_stationary};
use lgkac::dirac::{continuation_check, evolve_dirac_with, locate_overlap_zeros, DiracParams, SpinorField};
use lgkac::io::ingest_csv;
use lgkac::lattice::SpaceGrid;
use lgkac::observables::{binarize_threshold, kac_internal_state, BinarySeries, ThresholdSpec};
use lgkac::stochastic::{
    kac_position_variance, simulate_kac_ensemble, simulate_ou_ensemble, KacInitialState, KacParams, OUParams, TimeGrid,
};
use lgkac::telegraph::{compare_pde_mc, evolve_telegraph_with, telegraph_moments, Field1D, TelegraphParams};
use lgkac::theory::{enumerate_lg_bound, k_damped_oscillatory, k_exponential, OscillatoryModel};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lgkac(dir: &Path, args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lgkac")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn paper_point_value() -> Outcome {
    let dir = tempdir()?;
    let summary = lgkac(
        dir.path(),
        &["theory", "--model", "oscillatory", "--omega", "1", "--gamma", "0", "--tau-min", "0.01", "--tau-max", &PI.to_string(), "--out", "k.csv"],
    )?;
    let k_max = summary["k_max"].as_f64().ok_or("no k_max in summary")?;
    let tau_star = summary["tau_star"].as_f64().ok_or("no tau_star in summary")?;
    let model = OscillatoryModel::new(1.0, 0.0).map_err(|e| e.to_string())?;
    let at_pi_3 = k_damped_oscillatory(&model, FRAC_PI_3);
    ensure((k_max - 1.5).abs() <= 1e-9, || format!("k_max = {k_max}"))?;
    ensure((at_pi_3 - 1.5).abs() <= 1e-9, || format!("K(pi/3) = {at_pi_3}"))?;
    ensure((tau_star - FRAC_PI_3).abs() <= 1e-6, || format!("tau* = {tau_star}"))?;
    Ok(format!("K(pi/3) = {at_pi_3:.15}, CLI max {k_max:.15} at tau {tau_star:.9}"))
}

fn enumeration_bound() -> Outcome {
    let b = enumerate_lg_bound();
    ensure(b == (1, -3), || format!("got {b:?}"))?;
    Ok(format!("{b:?}"))
}

fn kac_correlation_law() -> Outcome {
    let p: KacParams<f64> = KacParams { mu: 0.0, v: 1.0, lambda: 1.0, x_init: 0.0, s_init: 1 };
    let grid = TimeGrid::new(0.0, 0.25, 4).map_err(|e| e.to_string())?;
    let trajs = simulate_kac_ensemble(&p, &grid, 2024, 100_000, KacInitialState::Symmetric).map_err(|e| e.to_string())?;
    let series: Vec<_> = trajs.iter().enumerate().map(|(i, t)| kac_internal_state(t, i as i64)).collect();
    let mut detail = Vec::new();
    for (k, t) in [(1, 0.25f64), (2, 0.5), (4, 1.0)] {
        let c = correlate_ensemble(&series, 0, k).map_err(|e| e.to_string())?;
        let expected: f64 = (-2.0 * t).exp();
        let err = (c.value - expected).abs();
        ensure(err <= 3.0 * c.std_error, || format!("t={t}: {} vs {expected}, se {}", c.value, c.std_error))?;
        detail.push(format!("t={t}: |err| {err:.4} (3se {:.4})", 3.0 * c.std_error));
    }
    Ok(detail.join(", "))
}

fn ou_correlation() -> Outcome {
    // Stationary variance sigma^2 / (2 gamma) = 1, so the centred moment is e^{-tau}.
    let p = OUParams { gamma: 1.0, sigma: SQRT_2, v_rest: 0.0, v_init: 0.0 };
    let grid = TimeGrid::new(0.0, 0.5, 24).map_err(|e| e.to_string())?;
    let trajs = simulate_ou_ensemble(&p, &grid, 77, 100_000).map_err(|e| e.to_string())?;
    let start = grid.index_of(10.0).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for tau in [0.5, 1.0, 2.0] {
        let j = grid.index_of(10.0 + tau).map_err(|e| e.to_string())?;
        let m = cross_moment_ensemble(&trajs, start, j, p.v_rest).map_err(|e| e.to_string())?;
        let expected: f64 = (-tau).exp();
        let err = (m.mean - expected).abs();
        ensure(err <= 3.0 * m.std_error, || format!("tau={tau}: {} vs {expected}, se {}", m.mean, m.std_error))?;
        detail.push(format!("tau={tau}: |err| {err:.4} (3se {:.4})", 3.0 * m.std_error));
    }
    Ok(detail.join(", "))
}

fn random_triples(rng: &mut ChaCha8Rng, grid: &TimeGrid<f64>, n: usize) -> Vec<(f64, f64, f64)> {
    (0..n)
        .map(|_| {
            let mut idx = [0usize; 3];
            loop {
                for i in &mut idx {
                    *i = rng.random_range(0..grid.len());
                }
                idx.sort_unstable();
                if idx[0] < idx[1] && idx[1] < idx[2] {
                    break;
                }
            }
            (grid.time(idx[0]), grid.time(idx[1]), grid.time(idx[2]))
        })
        .collect()
}

fn no_violation_for_classical_data() -> Outcome {
    let grid = TimeGrid::new(0.0, 0.1, 100).map_err(|e| e.to_string())?;
    let trials = 5_000;
    let ou = OUParams { gamma: 1.0, sigma: 1.0, v_rest: 0.0, v_init: 0.3 };
    let kac = KacParams { mu: 0.0, v: 1.0, lambda: 1.0, x_init: 0.0, s_init: 1 };
    let ou_trajs = simulate_ou_ensemble(&ou, &grid, 11, trials).map_err(|e| e.to_string())?;
    let kac_trajs = simulate_kac_ensemble(&kac, &grid, 12, trials, KacInitialState::Symmetric).map_err(|e| e.to_string())?;
    let at_zero = ThresholdSpec { v_th: 0.0 };

    let ou_q: Vec<BinarySeries<f64>> =
        ou_trajs.iter().enumerate().map(|(i, t)| binarize_threshold(t, &at_zero, i as i64)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let state_q: Vec<_> = kac_trajs.iter().enumerate().map(|(i, t)| kac_internal_state(t, i as i64)).collect();
    let pos_q: Vec<BinarySeries<f64>> = kac_trajs
        .iter()
        .enumerate()
        .map(|(i, t)| binarize_threshold(&t.position(), &at_zero, i as i64))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for (name, set) in [("ou-threshold", &ou_q), ("kac-state", &state_q), ("kac-position", &pos_q)] {
        for (t1, t2, t3) in random_triples(&mut rng, &grid, 20) {
            let r = lg_from_trials(set, t1, t2, t3).map_err(|e| e.to_string())?;
            let margin = r.k - (1.0 + 3.0 * r.k_std_error);
            worst = worst.max(margin);
            ensure(margin <= 0.0, || format!("{name} at ({t1}, {t2}, {t3}): K = {} se {}", r.k, r.k_std_error))?;
        }
    }
    Ok(format!("60 triples, max K - (1 + 3se) = {worst:.4}"))
}

fn stationary_kac_scan() -> Outcome {
    let lambda = 1.0;
    let p: KacParams<f64> = KacParams { mu: 0.0, v: 1.0, lambda, x_init: 0.0, s_init: 1 };
    let dt = 0.05;
    let grid = TimeGrid::new(0.0, dt, 200_000).map_err(|e| e.to_string())?;
    let traj = simulate_kac_ensemble(&p, &grid, 606, 1, KacInitialState::Symmetric).map_err(|e| e.to_string())?;
    let series = kac_internal_state(&traj[0], 0);
    let lags: Vec<usize> = (2..=40).collect();
    let burn_in = (5.0 / dt) as usize;
    let scan = lg_scan_stationary(&series, &lags, burn_in, Some(2.0 * lambda)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for pt in &scan {
        let theory = 2.0 * (-2.0 * lambda * pt.tau).exp() - (-4.0 * lambda * pt.tau).exp();
        let err = (pt.k - theory).abs();
        worst = worst.max(err);
        ensure(err <= 0.03, || format!("tau={}: {} vs {theory}", pt.tau, pt.k))?;
        ensure(pt.k <= 1.0 + 3.0 * pt.std_error, || format!("tau={}: K {} se {}", pt.tau, pt.k, pt.std_error))?;
    }
    Ok(format!("{} lags in [0.1, 2], max |K - theory| = {worst:.4}", scan.len()))
}

fn pde_vs_mc() -> Outcome {
    let dt = 0.005;
    let p = TelegraphParams { mu: 0.0, v: 1.0, lambda: 1.0, dt };
    let cmp = compare_pde_mc(&p, 1.0, 100_000, 8, 64).map_err(|e| e.to_string())?;
    ensure(cmp.l1_distance < 0.05, || format!("L1 = {}", cmp.l1_distance))?;

    let n = 600;
    let grid = SpaceGrid::new(-((n / 2) as f64) * dt, dt, n).map_err(|e| e.to_string())?;
    let mut worst_mass = 0.0f64;
    let mut outside = 0usize;
    evolve_telegraph_with(&Field1D::delta(grid, 0.0).map_err(|e| e.to_string())?, &p, 1.0, |k, f| {
        worst_mass = worst_mass.max((telegraph_moments(f).unwrap().mass - 1.0).abs());
        let reach = k as f64 * dt + dt;
        outside += grid.xs().enumerate().filter(|&(i, x)| x.abs() > reach && (f.p_plus[i] != 0.0 || f.p_minus[i] != 0.0)).count();
    })
    .map_err(|e| e.to_string())?;
    ensure(worst_mass <= 1e-10, || format!("mass drift {worst_mass:e}"))?;
    ensure(outside == 0, || format!("{outside} nonzero cells beyond |x| = t + dx"))?;
    Ok(format!("L1 = {:.4}, mass drift {worst_mass:.1e}, support respected", cmp.l1_distance))
}

fn variance_by_quadrature(v: f64, lambda: f64, t: f64) -> f64 {
    let n = 1500;
    let h = t / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (s, u) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            acc += (-2.0 * lambda * (s - u).abs()).exp();
        }
    }
    v * v * acc * h * h
}

fn telegraph_moments_match() -> Outcome {
    let (v, lambda, t) = (1.0f64, 1.0, 1.0);
    let closed = kac_position_variance(v, lambda, t);
    let formula = v * v / (2.0 * lambda * lambda) * (2.0 * lambda * t - 1.0 + (-2.0 * lambda * t).exp());
    let quad = variance_by_quadrature(v, lambda, t);
    ensure((quad - formula).abs() <= 1e-5 && (closed - formula).abs() <= 1e-14, || format!("oracle {quad} vs {formula} vs {closed}"))?;

    let dt = 0.004;
    let n = 700;
    let grid = SpaceGrid::new(-((n / 2) as f64) * dt, dt, n).map_err(|e| e.to_string())?;
    let p: TelegraphParams<f64> = TelegraphParams { mu: 0.0, v, lambda, dt };
    let mut last = None;
    evolve_telegraph_with(&Field1D::delta(grid, 0.0).map_err(|e| e.to_string())?, &p, t, |_, f| last = Some(telegraph_moments(f).unwrap()))
        .map_err(|e| e.to_string())?;
    let m = last.ok_or("no steps taken")?;
    let rel = (m.variance - formula).abs() / formula;
    ensure(rel <= 0.02, || format!("variance {} vs {formula}", m.variance))?;
    Ok(format!("variance {:.5} vs {formula:.5} (rel {rel:.2e}), quadrature oracle {quad:.7}", m.variance))
}

fn dirac_unitarity_and_oscillation() -> Outcome {
    let m = 1.7;
    let dt = 0.01;
    let n = 128;
    let grid = SpaceGrid::new(0.0, dt, n).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let u_plus = (0..n).map(|_| draw()).collect();
    let u_minus = (0..n).map(|_| draw()).collect();
    let u0 = SpinorField::new(grid, u_plus, u_minus).map_err(|e| e.to_string())?;
    let n0 = u0.norm_sq();
    let t_final = 10.0;
    let mut drift = 0.0f64;
    evolve_dirac_with(&u0, &DiracParams { c_speed: 1.0, m_tilde: m, dt }, t_final, |_, u| drift = drift.max((u.norm_sq() - n0).abs() / n0))
        .map_err(|e| e.to_string())?;
    ensure(drift / t_final <= 1e-10, || format!("norm drift {drift:e} over t = {t_final}"))?;

    // Uniform mode: the mass mixing is exp(i m t (I - sigma_x)). Its overlap with
    // (1, 0) is sum_k w_k exp(i m t e_k) over the eigenpairs of I - sigma_x.
    let eig = (Matrix2::<f64>::identity() - Matrix2::new(0.0, 1.0, 1.0, 0.0)).symmetric_eigen();
    let w: Vec<f64> = (0..2).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    ensure((w[0] - 0.5).abs() <= 1e-12 && (w[1] - 0.5).abs() <= 1e-12, || format!("weights {w:?}"))?;
    let gap = (eig.eigenvalues[0] - eig.eigenvalues[1]).abs();
    let found = locate_overlap_zeros(m, 3, 50).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (k, z) in found.iter().enumerate() {
        let oracle = (2 * k + 1) as f64 * PI / (m * gap);
        let closed = (FRAC_PI_2 + k as f64 * PI) / m;
        ensure((oracle - closed).abs() <= 1e-12, || format!("oracle {oracle} vs {closed}"))?;
        worst = worst.max((z - oracle).abs());
        ensure((z - oracle).abs() <= 1e-6, || format!("zero {k}: {z} vs {oracle}"))?;
    }
    Ok(format!("drift/t = {:.1e}, 3 overlap zeros within {worst:.1e}", drift / t_final))
}

fn analytic_continuation() -> Outcome {
    let grid = SpaceGrid::new(0.0, 0.1, 32).map_err(|e| e.to_string())?;
    let coarse = continuation_check(1.0f64, 1.0, &grid, 2e-3, 0.5).map_err(|e| e.to_string())?;
    let fine = continuation_check(1.0f64, 1.0, &grid, 1e-3, 0.5).map_err(|e| e.to_string())?;
    let order = (coarse.max_deviation / fine.max_deviation).log2();
    ensure((0.8..=1.2).contains(&order), || format!("order {order}"))?;
    let massless = coarse.massless_agreement.max(fine.massless_agreement);
    ensure(massless <= 1e-12, || format!("massless agreement {massless:e}"))?;
    Ok(format!("deviation {:.3e} -> {:.3e}, order {order:.3}, massless {massless:.1e}", coarse.max_deviation, fine.max_deviation))
}

fn exponential_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_k = f64::NEG_INFINITY;
    let mut worst_id = 0.0f64;
    for _ in 0..10_000 {
        let gamma: f64 = rng.random_range(1e-3..20.0);
        let tau: f64 = rng.random_range(0.0..20.0);
        let k = k_exponential(gamma, tau);
        let identity = 1.0 - (1.0 - (-gamma * tau).exp()).powi(2);
        worst_k = worst_k.max(k);
        worst_id = worst_id.max((k - identity).abs());
    }
    ensure(worst_k <= 1.0, || format!("max K = {worst_k}"))?;
    ensure(worst_id <= 1e-12, || format!("identity off by {worst_id:e}"))?;
    Ok(format!("max K = {worst_k}, identity residual {worst_id:.1e}"))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let mut runs = Vec::new();
    for _ in 0..2 {
        lgkac(d, &["validate", "--seed", "31337", "--out", "v.json"])?;
        runs.push(std::fs::read(d.join("v.json")).map_err(|e| e.to_string())?);
    }
    let (a, b) = (&runs[0], &runs[1]);
    ensure(a == b, || "validate outputs differ".into())?;

    lgkac(d, &["simulate", "ou", "--gamma", "0.8", "--sigma", "1.3", "--v-rest", "-0.2", "--v-init", "0.1", "--dt", "0.03", "--steps", "300", "--trials", "20", "--seed", "4", "--out", "ou.csv"])?;
    let read = ingest_csv(&d.join("ou.csv")).map_err(|e| e.to_string())?;
    let p: OUParams<f64> = OUParams { gamma: 0.8, sigma: 1.3, v_rest: -0.2, v_init: 0.1 };
    let grid = TimeGrid::new(0.0, 0.03, 300).map_err(|e| e.to_string())?;
    let direct = simulate_ou_ensemble(&p, &grid, 4, 20).map_err(|e| e.to_string())?;
    ensure(read.len() == direct.len(), || format!("{} trials read, {} simulated", read.len(), direct.len()))?;
    for ((id, r), (i, t)) in read.iter().zip(direct.iter().enumerate()) {
        ensure(*id == i as i64, || format!("trial id {id} at position {i}"))?;
        let same = r.values.len() == t.values.len() && r.values.iter().zip(&t.values).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("trial {i} values differ after the round trip"))?;
    }
    Ok(format!("validate JSON identical ({} bytes), 20 x 301 values bitwise equal after CSV round trip", a.len()))
}

fn main() {
    let criteria: [(&str, Duration, Criterion); 12] = [
        ("paper point value K(pi/3) = 3/2", Duration::from_secs(1), paper_point_value),
        ("enumeration bound (1, -3)", Duration::from_secs(1), enumeration_bound),
        ("Kac state correlation e^{-2t}", Duration::from_secs(30), kac_correlation_law),
        ("OU correlation e^{-tau}", Duration::from_secs(30), ou_correlation),
        ("no violation for classical trajectories", Duration::from_secs(120), no_violation_for_classical_data),
        ("stationary Kac K(tau) vs theory", Duration::from_secs(60), stationary_kac_scan),
        ("telegraph PDE vs Monte Carlo", Duration::from_secs(60), pde_vs_mc),
        ("telegraph variance", Duration::from_secs(10), telegraph_moments_match),
        ("Dirac unitarity and overlap zeros", Duration::from_secs(10), dirac_unitarity_and_oscillation),
        ("analytic continuation", Duration::from_secs(30), analytic_continuation),
        ("exponential bound", Duration::from_secs(1), exponential_bound),
        ("reproducibility", Duration::from_secs(60), reproducibility),
    ];
    let mut failures = 0;
    for (n, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed <= *budget {
                Ok(d)
            } else {
                Err(format!("{d}; took longer than {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({:.2}s): {detail}", n + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({:.2}s): {why}", n + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
