use super::inner::{InnerSolution, InnerSolver};
use super::{responses_from_u, ResponseQuad, SynthesisConfig};
use crate::error::Result;
use crate::lti::FirTm;
use lqg_conic::Status;
use serde::{Deserialize, Serialize};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone)]
pub struct GoldenResult {
    pub gamma: f64,
    pub value: f64,
    /// Every `(gamma, value)` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
}

/// Golden-section minimization of `f` over `[lo, hi]` down to bracket width
/// `tol`. The left endpoint is probed too; the best evaluated point wins,
/// ties going to the smaller argument.
pub fn golden_section_search(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<GoldenResult> {
    let mut probes = Vec::new();
    let mut eval = |x: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = f(x)?;
        probes.push((x, v));
        Ok(v)
    };
    eval(lo, &mut probes)?;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut probes)?;
    let mut fd = eval(d, &mut probes)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut probes)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut probes)?;
        }
    }
    let mut best = probes[0];
    for &(x, v) in &probes[1..] {
        if v < best.1 || (v == best.1 && x < best.0) {
            best = (x, v);
        }
    }
    Ok(GoldenResult { gamma: best.0, value: best.1, probes })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub gamma: f64,
    pub phi: f64,
    pub psi: f64,
    pub fast_path: bool,
    pub iterations: usize,
    pub max_iters_hit: bool,
    pub residuals: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub gamma_star: f64,
    pub responses: ResponseQuad,
    /// Certified upper bound on `||U||_inf`.
    pub u_hinf: f64,
    pub phi: f64,
    /// `phi(gamma*) / (1 - eps gamma*)`.
    pub certified_bound: f64,
    pub h_value: f64,
    pub g_hat_hinf: f64,
    pub eps: f64,
    pub alpha: f64,
    pub l_u: usize,
    pub probes: Vec<Probe>,
}

impl SynthesisResult {
    pub fn u(&self) -> &FirTm {
        &self.responses.u
    }
}

impl InnerSolver {
    /// `psi(gamma) = phi(gamma) / (1 - eps gamma)` with the inner solution.
    pub fn psi(&mut self, gamma: f64) -> Result<(f64, InnerSolution)> {
        let s = self.solve(gamma)?;
        Ok((s.phi / (1.0 - self.config().eps * gamma), s))
    }
}

/// Outer search over `gamma in [0, (1 - 1e-6) / eps]`.
pub fn golden_section(g_hat: &FirTm, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    let mut solver = InnerSolver::new(g_hat, cfg)?;
    synthesize_with(&mut solver)
}

pub(crate) fn synthesize_with(solver: &mut InnerSolver) -> Result<SynthesisResult> {
    let cfg = solver.config().clone();
    let hi = (1.0 - 1e-6) / cfg.eps;
    let mut probes = Vec::new();
    let res = golden_section_search(
        |g| {
            let (psi, s) = solver.psi(g)?;
            probes.push(Probe {
                gamma: g,
                phi: s.phi,
                psi,
                fast_path: s.fast_path,
                iterations: s.iterations,
                max_iters_hit: s.status == Some(Status::MaxIters),
                residuals: s.residuals,
            });
            Ok(psi)
        },
        0.0,
        hi,
        cfg.gamma_tol(),
    )?;
    let best = solver.solve(res.gamma)?;
    let g_hat = solver.model().clone();
    Ok(SynthesisResult {
        gamma_star: res.gamma,
        responses: responses_from_u(&g_hat, &best.u)?,
        u_hinf: best.u_hinf,
        phi: best.phi,
        certified_bound: res.value,
        h_value: solver.h,
        g_hat_hinf: solver.g_hat_hinf,
        eps: cfg.eps,
        alpha: cfg.alpha,
        l_u: cfg.l_u,
        probes,
    })
}
