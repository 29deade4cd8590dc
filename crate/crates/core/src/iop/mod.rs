//! Robust synthesis over the Youla parameter `U` of the estimated plant.
//!
//! For a stable model `G`, the four closed-loop responses are affine in `U`:
//! `Y = I + G U`, `W = Y G`, `Z = I + U G`. The robust program minimizes
//! `||[sqrt(1+h) Y, W; U, Z]||_H2 / (1 - eps gamma)` subject to
//! `||U||_inf <= min(gamma, alpha)`.

mod controller;
mod inner;
mod search;

pub use controller::{realize_controller, FirController};
pub use inner::{assemble_inner_problem, inner_solve, InnerProblem, InnerSolution, InnerSolver};
pub use search::{golden_section, golden_section_search, GoldenResult, Probe, SynthesisResult};

use crate::error::{Error, Result};
use crate::lti::{fir_convolve, h2_norm_weighted, psd_sqrt, FirTm, LqgWeights};
use lqg_conic::Settings;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// The four closed-loop maps from `(v, w)` to `(y, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseQuad {
    pub y: FirTm,
    pub u: FirTm,
    pub w: FirTm,
    pub z: FirTm,
}

pub fn responses_from_u(g_hat: &FirTm, u: &FirTm) -> Result<ResponseQuad> {
    let (p, m) = (g_hat.rows(), g_hat.cols());
    if u.rows() != m || u.cols() != p {
        return Err(Error::Dimension(format!("U is {}x{}, plant model is {p}x{m}", u.rows(), u.cols())));
    }
    let gu = fir_convolve(g_hat, u)?;
    let y = FirTm::identity(p).add(&gu)?;
    let w = fir_convolve(&y, g_hat)?;
    let z = FirTm::identity(m).add(&fir_convolve(u, g_hat)?)?;
    Ok(ResponseQuad { y, u: u.clone(), w, z })
}

impl ResponseQuad {
    /// Max coefficient residual of `[I, -G][Y W; U Z] = [I, 0]` and
    /// `[Y W; U Z][-G; I] = [0; I]`.
    pub fn residual(&self, g_hat: &FirTm) -> Result<f64> {
        let (p, m) = (g_hat.rows(), g_hat.cols());
        let r1 = self.y.sub(&fir_convolve(g_hat, &self.u)?)?.sub(&FirTm::identity(p))?;
        let r2 = self.w.sub(&fir_convolve(g_hat, &self.z)?)?;
        let r3 = self.w.sub(&fir_convolve(&self.y, g_hat)?)?;
        let r4 = self.z.sub(&fir_convolve(&self.u, g_hat)?)?.sub(&FirTm::identity(m))?;
        Ok([r1, r2, r3, r4].iter().map(FirTm::max_abs).fold(0.0, f64::max))
    }

    /// `||[sqrt(1+h) Y, W; U, Z]||_H2^2` with the cost weights.
    pub fn cost_squared(&self, h: f64, weights: &LqgWeights) -> f64 {
        let qh = psd_sqrt(&weights.q);
        let rh = psd_sqrt(&weights.r);
        let ip = DMatrix::identity(self.y.cols(), self.y.cols());
        let im = DMatrix::identity(self.z.cols(), self.z.cols());
        let (sv, sw) = (weights.sigma_v, weights.sigma_w);
        (1.0 + h) * h2_norm_weighted(&self.y, &qh, &(&ip * sv)).powi(2)
            + h2_norm_weighted(&self.w, &qh, &(&im * sw)).powi(2)
            + h2_norm_weighted(&self.u, &rh, &(&ip * sv)).powi(2)
            + h2_norm_weighted(&self.z, &rh, &(&im * sw)).powi(2)
    }
}

/// `eps g (2 + alpha g) + eps^2 (2 + alpha g)^2` with `g = ||G_hat||_inf`.
pub fn h_factor(eps: f64, alpha: f64, g_hat_hinf: f64) -> f64 {
    let k = 2.0 + alpha * g_hat_hinf;
    eps * g_hat_hinf * k + eps * eps * k * k
}

/// Default `alpha = 0.999 / eps`.
pub fn default_alpha(eps: f64) -> f64 {
    0.999 / eps
}

/// Lower end `sqrt(2) u / (1 - eps u)` of the admissible alpha range, for
/// a known `u = ||U*||_inf`.
pub fn experiment_alpha(eps: f64, u_star_hinf: f64) -> f64 {
    std::f64::consts::SQRT_2 * u_star_hinf / (1.0 - eps * u_star_hinf)
}

/// Default Youla horizon `max(4 L_G, 32)`.
pub fn default_l_u(g_hat: &FirTm) -> usize {
    (4 * g_hat.horizon()).max(32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub eps: f64,
    pub alpha: f64,
    pub l_u: usize,
    /// Absolute tolerance of the outer search; `None` means `1e-3 / eps`.
    #[serde(default)]
    pub gamma_tol: Option<f64>,
    /// Cost weights; `None` means identity weights and unit noise.
    #[serde(default)]
    pub weights: Option<LqgWeights>,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_solver_tol() -> f64 {
    1e-7
}

fn default_max_iters() -> usize {
    50_000
}

impl SynthesisConfig {
    pub fn new(eps: f64, alpha: f64, l_u: usize) -> Self {
        SynthesisConfig { eps, alpha, l_u, gamma_tol: None, weights: None, solver_tol: default_solver_tol(), max_iters: default_max_iters() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Validation(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Validation(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.alpha * self.eps >= 1.0 {
            return Err(Error::Validation(format!("alpha = {} must be below 1/eps = {}", self.alpha, 1.0 / self.eps)));
        }
        if self.l_u == 0 {
            return Err(Error::Validation("L_u must be at least 1".into()));
        }
        if let Some(t) = self.gamma_tol {
            if !(t > 0.0) {
                return Err(Error::Validation("gamma_tol must be positive".into()));
            }
        }
        if !(self.solver_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Validation("solver tolerance and iteration limit must be positive".into()));
        }
        Ok(())
    }

    pub fn gamma_tol(&self) -> f64 {
        self.gamma_tol.unwrap_or(1e-3 / self.eps)
    }

    pub fn weights_for(&self, m: usize, p: usize) -> LqgWeights {
        self.weights.clone().unwrap_or_else(|| LqgWeights::identity(m, p))
    }

    pub(crate) fn settings(&self) -> Settings {
        Settings { tol: self.solver_tol, max_iters: self.max_iters, ..Settings::default() }
    }
}
