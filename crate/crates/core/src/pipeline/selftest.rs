//! Fast versions of the invariant suites, for `robust-lqg selftest`.

use crate::error::Result;
use crate::evaluation::{closed_loop, closed_loop_cost, optimal_lqg, small_gain_check};
use crate::iop::{golden_section, SynthesisConfig};
use crate::lti::{h2_norm, hinf_norm_grid, hinf_norm_sdp, markov_parameters, FirTm, LqgWeights};
use crate::pipeline::random_stable_plant;
use lqg_conic::{solve, Cone, ConeProblem, CsrMatrix, Settings};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn random_fir(rng: &mut ChaCha8Rng, p: usize, m: usize, len: usize) -> FirTm {
    let coeffs = (0..len)
        .map(|_| {
            DMatrix::from_fn(p, m, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
        })
        .collect();
    FirTm::new(coeffs).expect("nonempty")
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name: name.into(), passed, detail },
        Err(e) => Check { name: name.into(), passed: false, detail: e.to_string() },
    }
}

fn parseval(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (p, m, len) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=32));
        let g = random_fir(rng, p, m, len);
        // a trigonometric polynomial of degree < n is integrated exactly by n points
        let n = 2 * len + 1;
        let integral: f64 = (0..n).map(|k| g.freq_response(2.0 * std::f64::consts::PI * k as f64 / n as f64).norm_squared()).sum::<f64>() / n as f64;
        worst = worst.max((h2_norm(&g) - integral.sqrt()).abs());
    }
    Ok((worst <= 1e-6, format!("max |h2 - integral| = {worst:.2e}")))
}

fn sdp_vs_grid(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for _ in 0..5 {
        let (p, m, len) = (rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(1..=4));
        let g = random_fir(rng, p, m, len);
        let grid = hinf_norm_grid(&g, 8192);
        let sdp = hinf_norm_sdp(&g, 1e-7)?;
        ok &= grid <= sdp + 1e-9 && sdp <= grid + 1e-3;
        worst = worst.max(sdp - grid);
    }
    Ok((ok, format!("max sdp - grid = {worst:.2e}")))
}

fn iop_exactness(seed: u64) -> Result<(bool, String)> {
    let ss = random_stable_plant(2, 1, 1, 0.6, seed)?;
    let g_hat = markov_parameters(&ss, 8)?;
    let cfg = SynthesisConfig::new(0.05, 5.0, 16);
    let r = golden_section(&g_hat, &cfg)?;
    let res = r.responses.residual(&g_hat)?;
    let id = r.responses.y.coeff(0) == DMatrix::identity(1, 1) && r.responses.z.coeff(0) == DMatrix::identity(1, 1);
    Ok((res <= 1e-10 && id, format!("residual {res:.2e}, Y_0 = Z_0 = I: {id}")))
}

fn lqg_optimality(seed: u64) -> Result<(bool, String)> {
    let ss = random_stable_plant(3, 1, 2, 0.8, seed)?;
    let w = LqgWeights::identity(1, 2);
    let (k, j) = optimal_lqg(&ss, &w)?;
    let open = (3.0 + h2_norm(&markov_parameters(&ss, 400)?).powi(2)).sqrt();
    // impulse-response accumulation of the closed loop as an independent cost
    let (y, wm, u, z) = closed_loop(&ss, &k)?.responses(600)?;
    let acc = (h2_norm(&y).powi(2) + h2_norm(&wm).powi(2) + h2_norm(&u).powi(2) + h2_norm(&z).powi(2)).sqrt();
    let lyap = closed_loop_cost(&ss, &k, &w)?;
    let rel = (acc - lyap).abs() / lyap;
    Ok((j <= open + 1e-12 && rel <= 1e-6, format!("J* = {j:.6}, K=0 cost {open:.6}, Lyapunov vs impulse {rel:.1e}")))
}

fn small_gain(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut ok = true;
    let mut margin = f64::INFINITY;
    for _ in 0..5 {
        let g1 = random_fir(rng, 1, 1, 3);
        let g2 = random_fir(rng, 1, 1, 3);
        let s = 0.9_f64.sqrt() * rng.gen_range(0.3..0.99);
        let g1 = g1.scale(s / hinf_norm_grid(&g1, 4096));
        let g2 = g2.scale(s / hinf_norm_grid(&g2, 4096));
        let (lhs, rhs) = small_gain_check(&g1, &g2, 400)?;
        ok &= lhs <= rhs + 1e-4;
        margin = margin.min(rhs - lhs);
    }
    Ok((ok, format!("min rhs - lhs = {margin:.3e}")))
}

fn cone_solver(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    // project c onto the unit ball: min ||x - c||^2 s.t. ||x|| <= 1
    let n = 4;
    let c = DVector::from_fn(n, |_, _| 3.0 * rng.gen_range(-1.0..1.0));
    let c = if c.norm() < 1.5 { c * 2.0 } else { c };
    let p = CsrMatrix::from_dense(&(DMatrix::identity(n, n) * 2.0));
    let q: Vec<f64> = c.iter().map(|v| -2.0 * v).collect();
    let mut a = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        a[(i + 1, i)] = -1.0;
    }
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    let prob = ConeProblem::new(p, q, CsrMatrix::from_dense(&a), b, vec![Cone::Soc(n + 1)])?;
    let settings = Settings { tol: 1e-9, ..Settings::default() };
    let s1 = solve(&prob, &settings)?;
    let s2 = solve(&prob, &settings)?;
    let expect = &c / c.norm();
    let err = (DVector::from_vec(s1.x.clone()) - expect).amax();
    let same = s1.x.iter().zip(&s2.x).all(|(a, b)| a.to_bits() == b.to_bits());
    Ok((err <= 1e-5 && same, format!("projection error {err:.1e}, repeat identical: {same}")))
}

/// Run every suite; all must pass for a zero exit.
pub fn run_selftest(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check("parseval", || parseval(&mut rng)),
        check("hinf_sdp_vs_grid", || sdp_vs_grid(&mut rng)),
        check("iop_exactness", || iop_exactness(seed)),
        check("lqg_optimality", || lqg_optimality(seed)),
        check("small_gain", || small_gain(&mut rng)),
        check("cone_solver", || cone_solver(&mut rng)),
    ]
}
