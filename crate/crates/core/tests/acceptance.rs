//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line. Run with `--nocapture` to see them.

mod common;

#[path = "../../conic/tests/common/oracles.rs"]
mod conic_oracles;

use common::*;
use lqg_core::evaluation::{
    baseline, closed_loop_cost, e1_witness_check, fir_to_statespace, robust_stability_check, ControllerSS, SuboptReport, HINF_INFLATION,
};
use lqg_core::iop::{experiment_alpha, golden_section, InnerSolver, ResponseQuad, SynthesisConfig};
use lqg_core::lti::{h2_norm, hinf_norm_grid, hinf_norm_sdp, markov_parameters, FirTm, LqgWeights, StateSpace};
use lqg_core::pipeline::{loglog_fit, median, random_stable_plant, run_records, ExperimentConfig, PlantSource};
use lqg_core::sysid::tail_horizon;
use lqg_conic::Status;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

fn report(n: usize, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn finish(n: usize, pass: bool, detail: String) {
    report(n, pass, detail.clone());
    assert!(pass, "criterion {n} failed: {detail}");
}

/// Exactness of a synthesized quad: affine residual and identity leading
/// coefficients.
fn iop_exact(q: &ResponseQuad, g_hat: &FirTm) -> (f64, bool) {
    let res = q.residual(g_hat).unwrap();
    let (p, m) = (g_hat.rows(), g_hat.cols());
    let id = q.y.coeff(0) == DMatrix::identity(p, p) && q.z.coeff(0) == DMatrix::identity(m, m);
    (res, id)
}

fn assert_iop(q: &ResponseQuad, g_hat: &FirTm) {
    let (res, id) = iop_exact(q, g_hat);
    assert!(res <= 1e-10 && id, "IOP exactness violated: residual {res:e}, identity heads {id}");
}

fn two_state_plant() -> StateSpace {
    StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[0.6, 0.3, -0.2, 0.4]),
        DMatrix::from_row_slice(2, 1, &[1.0, 0.4]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
    )
    .unwrap()
}

#[test]
fn criterion_01_parseval() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (p, m, len) = random_dims(&mut rng, 3, 32);
        let g = random_fir(&mut rng, p, m, len);
        worst = worst.max((h2_norm(&g) - h2_frequency_integral(&g, 4096)).abs());
    }
    let el = t0.elapsed();
    finish(1, worst <= 1e-6 && el < Duration::from_secs(10), format!("max |h2 - integral| = {worst:.2e} over 100 FIRs in {el:.2?}"));
}

#[test]
fn criterion_02_hinf_sdp_vs_grid() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut below, mut above) = (0usize, f64::NEG_INFINITY);
    let mut bad = vec![];
    for i in 0..50 {
        let (p, m, len) = random_dims(&mut rng, 2, 6);
        let g = random_fir(&mut rng, p, m, len);
        let grid = hinf_norm_grid(&g, 8192);
        let sdp = hinf_norm_sdp(&g, 1e-7).unwrap();
        if sdp < grid {
            below += 1;
            bad.push(i);
        }
        if sdp > grid + 1e-3 {
            bad.push(i);
        }
        above = above.max(sdp - grid);
    }
    let el = t0.elapsed();
    finish(
        2,
        bad.is_empty() && el < Duration::from_secs(120),
        format!("max sdp - grid = {above:.2e}, {below} below grid, failures {bad:?}, {el:.2?}"),
    );
}

#[test]
fn criterion_03_iop_exactness() {
    // every quad emitted by the synthesis in this suite goes through
    // `assert_iop`; this test adds a dedicated batch over shapes and eps
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut heads = true;
    let mut count = 0;
    for _ in 0..12 {
        let (p, m) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let len = rng.gen_range(2..=5);
        let g_hat = random_strict_fir(&mut rng, p, m, len).scale(0.5);
        let eps = [0.02, 0.1, 0.3][count % 3];
        let cfg = SynthesisConfig::new(eps, 0.9 / eps, 8);
        let r = golden_section(&g_hat, &cfg).unwrap();
        let (res, id) = iop_exact(&r.responses, &g_hat);
        worst = worst.max(res);
        heads &= id;
        count += 1;
    }
    finish(3, worst <= 1e-10 && heads, format!("{count} quads, max residual {worst:.2e}, Y_0 = Z_0 = I: {heads}"));
}

#[test]
fn criterion_04_nominal_recovery() {
    let t0 = Instant::now();
    let ss = random_stable_plant(3, 1, 1, 0.7, 404).unwrap();
    let w = LqgWeights::identity(1, 1);
    let base = baseline(&ss, &w).unwrap();
    let g_hat = markov_parameters(&ss, tail_horizon(&ss).unwrap()).unwrap();
    let eps = 1e-9;
    let alpha = experiment_alpha(eps, HINF_INFLATION * base.u_star_hinf);
    let mut excess = vec![];
    for l_u in [8, 16, 32, 64] {
        let cfg = SynthesisConfig::new(eps, alpha, l_u);
        let r = golden_section(&g_hat, &cfg).unwrap();
        assert_iop(&r.responses, &g_hat);
        let k = ControllerSS::from_fir(r.u(), &g_hat).unwrap();
        let j = closed_loop_cost(&ss, &k, &w).unwrap();
        excess.push((j - base.j_star) / base.j_star);
    }
    let monotone = excess.windows(2).all(|x| x[1] <= x[0]);
    let el = t0.elapsed();
    let pass = excess[3] < 0.01 && monotone && el < Duration::from_secs(300);
    finish(4, pass, format!("relative excess over L_u = 8,16,32,64: {}, monotone {monotone}, {el:.2?}", sci(&excess)));
}

#[test]
fn criterion_05_robust_stability() {
    let t0 = Instant::now();
    let (mut stable, mut total) = (0usize, 0usize);
    let mut worst_rho: f64 = 0.0;
    let mut certified = true;
    for plant in 0..5u64 {
        let ss = random_stable_plant(3, 1, 1, 0.7, 500 + plant).unwrap();
        let g_hat = markov_parameters(&ss, 10).unwrap();
        for eps in [0.05, 0.1] {
            let cfg = SynthesisConfig::new(eps, 0.999 / eps, 24);
            let r = golden_section(&g_hat, &cfg).unwrap();
            assert_iop(&r.responses, &g_hat);
            certified &= r.u_hinf <= 1.0 / eps;
            let k = ControllerSS::from_fir(r.u(), &g_hat).unwrap();
            let rep = robust_stability_check(&g_hat, &k, eps, 200, 5000 + plant).unwrap();
            for t in &rep.trials {
                assert!(t.delta_hinf <= 0.95 * eps + 1e-12);
                worst_rho = worst_rho.max(t.spectral_radius);
            }
            stable += rep.trials.iter().filter(|t| t.stable).count();
            total += rep.trials.len();
        }
    }
    finish(
        5,
        stable == total && total == 2000 && certified,
        format!("{stable}/{total} perturbed loops stable, worst spectral radius {worst_rho:.4}, ||U||_inf <= 1/eps: {certified}, {:.2?}", t0.elapsed()),
    );
}

#[test]
fn criterion_06_suboptimality_bound() {
    let t0 = Instant::now();
    let ss = two_state_plant();
    // end-to-end runs through the pipeline
    let mut cfg = ExperimentConfig::new(PlantSource::Explicit { ss: ss.clone() }, vec![1000, 4000, 16000], (0..11).collect());
    cfg.window = Some(10);
    cfg.synthesis.l_u = Some(32);
    cfg.robustness_trials = 0;
    cfg.record_timings = false;
    let (rep, arts) = run_records(&cfg, 1).unwrap();
    let mut applicable = 0;
    let mut violations = vec![];
    let mut worst_slack = f64::INFINITY;
    for (r, a) in rep.records.iter().zip(&arts) {
        let s = r.subopt.as_ref().unwrap_or_else(|| panic!("record failed: {:?}", r.error));
        assert_iop(&a.synthesis.as_ref().unwrap().responses, a.g_hat.as_ref().unwrap());
        if s.bound_applicable {
            applicable += 1;
            worst_slack = worst_slack.min(s.bound_rhs - s.relative_gap);
            if s.relative_gap > s.bound_rhs + 1e-6 {
                violations.push((r.seed, r.n));
            }
        }
    }

    // gap against a controlled eps: fixed perturbation direction, scaled
    let w = LqgWeights::identity(1, 1);
    let base = baseline(&ss, &w).unwrap();
    let g_true = markov_parameters(&ss, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let dir = random_strict_fir(&mut rng, 1, 1, 40);
    let dir = dir.scale(1.0 / hinf_norm_grid(&dir, 8192));
    let eps_grid: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
    let mut gaps = vec![];
    for &eps in &eps_grid {
        // 0.9 eps of perturbation leaves room for the truncated tail
        let g_hat = g_true.add(&dir.scale(0.9 * eps)).unwrap();
        let alpha = experiment_alpha(eps, HINF_INFLATION * base.u_star_hinf);
        let r = golden_section(&g_hat, &SynthesisConfig::new(eps, alpha, 32)).unwrap();
        assert_iop(&r.responses, &g_hat);
        let k = ControllerSS::from_fir(r.u(), &g_hat).unwrap();
        let j = closed_loop_cost(&ss, &k, &w).unwrap();
        let s = SuboptReport::new(base.j_star, j, eps, alpha, base.u_star_hinf, base.g_star_hinf, r.g_hat_hinf);
        if s.bound_applicable && s.relative_gap > s.bound_rhs + 1e-6 {
            violations.push((0, 0));
        }
        gaps.push(s.relative_gap);
    }
    let fit = loglog_fit(&eps_grid, &gaps).expect("positive gaps");
    let slope_ok = (fit.slope - 1.0).abs() <= 0.3;
    let pass = applicable >= 30 && violations.is_empty() && slope_ok;
    finish(
        6,
        pass,
        format!(
            "{applicable} applicable runs, {} bound violations, min slack {worst_slack:.3e}; gap-vs-eps slope {:.3} +- {:.3} (gaps {}), {:.2?}",
            violations.len(),
            fit.slope,
            fit.half_width,
            sci(&gaps),
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_07_identification_scaling() {
    let t0 = Instant::now();
    let g = FirTm::scalar(&[0.0, 1.0, -0.6, 0.35, 0.2, -0.1]);
    let ss = fir_to_statespace(&g).unwrap();
    let ns: Vec<usize> = (8..=14).map(|k| 1usize << k).collect();
    let mut cfg = ExperimentConfig::new(PlantSource::Explicit { ss }, ns.clone(), (0..20).collect());
    cfg.window = Some(6);
    cfg.robustness_trials = 0;
    cfg.record_timings = false;
    let (rep, arts) = run_records(&cfg, 1).unwrap();
    for a in &arts {
        if let (Some(s), Some(g)) = (&a.synthesis, &a.g_hat) {
            assert_iop(&s.responses, g);
        }
    }
    let failures = rep.failures;
    let mut id_med = vec![];
    let mut gap_med = vec![];
    for &n in &ns {
        let recs: Vec<_> = rep.records.iter().filter(|r| r.n == n).collect();
        id_med.push(median(&mut recs.iter().filter_map(|r| r.identification.map(|e| e.oracle)).collect::<Vec<_>>()).unwrap());
        gap_med.push(median(&mut recs.iter().filter_map(|r| r.subopt.as_ref().map(|s| s.relative_gap)).collect::<Vec<_>>()).unwrap());
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let id_fit = loglog_fit(&xs, &id_med).unwrap();
    let gap_fit = loglog_fit(&xs, &gap_med).unwrap();
    let el = t0.elapsed();
    let id_ok = (id_fit.slope + 0.5).abs() <= 0.15;
    let gap_ok = (gap_fit.slope + 0.5).abs() <= 0.2;
    finish(
        7,
        id_ok && gap_ok && failures == 0 && el < Duration::from_secs(1200),
        format!(
            "id-error slope {:.3} (ok {id_ok}), gap slope {:.3} (ok {gap_ok}), {failures} failed records, medians id {} gap {}, {el:.2?}",
            id_fit.slope,
            gap_fit.slope,
            sci(&id_med),
            sci(&gap_med)
        ),
    );
}

/// Nonincreasing then nondecreasing, up to relative slack `tol`.
fn unimodal(v: &[f64], tol: f64) -> bool {
    let i = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|x| x.0).unwrap();
    let slack = |a: f64| tol * a.abs().max(1.0);
    v[..=i].windows(2).all(|w| w[1] <= w[0] + slack(w[0])) && v[i..].windows(2).all(|w| w[1] + slack(w[1]) >= w[0])
}

#[test]
fn criterion_08_quasi_convexity() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut all_unimodal = true;
    let mut worst_dist: f64 = 0.0;
    let mut worse_value = 0;
    let mut located = vec![];
    for _ in 0..10 {
        let g_hat = random_strict_fir(&mut rng, 1, 1, 4).scale(3.0);
        // small eps relative to the unconstrained norm keeps the optimum off gamma = 0
        let probe = SynthesisConfig::new(1e-6, 1.0, 6);
        let u0 = InnerSolver::new(&g_hat, &probe).unwrap().unconstrained().unwrap().2;
        let eps = 0.01 / u0.max(1e-3);
        let cfg = SynthesisConfig::new(eps, (1.5 * u0).min(0.999 / eps), 6);
        let tol = cfg.gamma_tol();
        let mut solver = InnerSolver::new(&g_hat, &cfg).unwrap();
        let hi = (1.0 - 1e-6) / eps;
        let grid: Vec<f64> = (0..50).map(|i| hi * i as f64 / 49.0).collect();
        let psi: Vec<f64> = grid.iter().map(|&g| solver.psi(g).unwrap().0).collect();
        all_unimodal &= unimodal(&psi, 1e-6);
        // zoom the grid around its minimizer until the spacing is below tol / 4
        let (mut lo, mut up) = (0.0, hi);
        let (mut best_g, mut best_v) = (0.0, f64::INFINITY);
        loop {
            let pts: Vec<f64> = (0..50).map(|i| lo + (up - lo) * i as f64 / 49.0).collect();
            for &g in &pts {
                let v = solver.psi(g).unwrap().0;
                if v < best_v {
                    best_v = v;
                    best_g = g;
                }
            }
            let step = (up - lo) / 49.0;
            if step <= tol / 4.0 {
                break;
            }
            lo = (best_g - step).max(0.0);
            up = (best_g + step).min(hi);
        }
        let r = golden_section(&g_hat, &cfg).unwrap();
        assert_iop(&r.responses, &g_hat);
        worst_dist = worst_dist.max((r.gamma_star - best_g).abs() / tol);
        located.push(r.gamma_star * eps);
        if r.certified_bound > best_v * (1.0 + 1e-9) {
            worse_value += 1;
        }
    }
    let interior = located.iter().filter(|&&x| x > 0.0).count();
    finish(
        8,
        all_unimodal && worst_dist <= 1.0,
        format!(
            "unimodal on all 10: {all_unimodal}; {interior}/10 interior minimizers; max |gamma_golden - gamma_grid| = {worst_dist:.3} gamma_tol; golden value above grid best in {worse_value}/10; eps gamma* = {}, {:.2?}",
            sci(&located),
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_09_cone_oracles() {
    let a = conic_oracles::oracle_suite(909);
    let b = conic_oracles::oracle_suite(909);
    let worst = a.iter().map(|c| c.error).fold(0.0, f64::max);
    let optimal = a.iter().all(|c| c.status == Status::Optimal);
    let identical = a.iter().zip(&b).all(|(x, y)| x.bits == y.bits);
    finish(9, a.len() == 100 && worst <= 1e-5 && optimal && identical, format!("{} problems, max oracle error {worst:.2e}, all optimal {optimal}, bit-identical rerun {identical}", a.len()));
}

#[test]
fn criterion_10_witness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let w = LqgWeights::identity(1, 1);
    let (mut feasible, mut norm_ok, mut chain_ok) = (0, 0, 0);
    let mut worst_res: f64 = 0.0;
    let mut etas = vec![];
    for i in 0..10u64 {
        let ss = random_stable_plant(2, 1, 1, 0.6, 1000 + i).unwrap();
        let base = baseline(&ss, &w).unwrap();
        let eta = rng.gen_range(0.05..0.15);
        let eps = eta / base.u_star_hinf;
        let len = tail_horizon(&ss).unwrap();
        let dir = random_strict_fir(&mut rng, 1, 1, len);
        let dir = dir.scale(1.0 / hinf_norm_grid(&dir, 8192));
        let g_hat = markov_parameters(&ss, len).unwrap().sub(&dir.scale(0.9 * eps)).unwrap();
        let alpha = experiment_alpha(eps, HINF_INFLATION * base.u_star_hinf);
        let r = e1_witness_check(&ss, &g_hat, eps, alpha, None).unwrap();
        etas.push(r.eta);
        worst_res = worst_res.max(r.residual);
        feasible += r.feasible as usize;
        norm_ok += r.norm_bound_ok as usize;
        chain_ok += r.chain_ok as usize;
    }
    let eta_ok = etas.iter().all(|&e| e <= 0.15);
    finish(
        10,
        feasible == 10 && norm_ok == 10 && eta_ok,
        format!("feasible {feasible}/10 (max residual {worst_res:.2e}), norm bound {norm_ok}/10, cost chain {chain_ok}/10, eta <= 0.15: {eta_ok}, {:.2?}", t0.elapsed()),
    );
}
