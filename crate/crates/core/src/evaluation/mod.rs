//! Riccati baseline, exact closed-loop costs and robustness certificates.

mod robust;

pub use robust::{
    adversarial_stability_check, e1_witness_check, fir_to_statespace, robust_stability_check, series_inverse, small_gain_check, RobustnessReport, RobustnessTrial, WitnessReport,
};

use crate::error::{Error, Result};
use crate::lti::linalg::{dlyap, psd_sqrt, spectral_norm, spectral_radius};
use crate::lti::norms::sigma_max;
use crate::lti::{freq_response, FirTm, LqgWeights, StateSpace};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `xi+ = A_k xi + B_k y`, `u = C_k xi + D_k y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSS {
    #[serde(rename = "A_k", with = "crate::serde_mat")]
    pub a_k: DMatrix<f64>,
    #[serde(rename = "B_k", with = "crate::serde_mat")]
    pub b_k: DMatrix<f64>,
    #[serde(rename = "C_k", with = "crate::serde_mat")]
    pub c_k: DMatrix<f64>,
    #[serde(rename = "D_k", with = "crate::serde_mat")]
    pub d_k: DMatrix<f64>,
}

impl ControllerSS {
    pub fn new(a_k: DMatrix<f64>, b_k: DMatrix<f64>, c_k: DMatrix<f64>, d_k: DMatrix<f64>) -> Result<Self> {
        let nk = a_k.nrows();
        let (m, p) = d_k.shape();
        if a_k.ncols() != nk || b_k.shape() != (nk, p) || c_k.shape() != (m, nk) {
            return Err(Error::Dimension(format!(
                "controller A_k {:?}, B_k {:?}, C_k {:?}, D_k {:?}",
                a_k.shape(),
                b_k.shape(),
                c_k.shape(),
                d_k.shape()
            )));
        }
        if a_k.iter().chain(b_k.iter()).chain(c_k.iter()).chain(d_k.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("controller matrices".into()));
        }
        Ok(ControllerSS { a_k, b_k, c_k, d_k })
    }

    /// The zero controller (no states).
    pub fn zero(m: usize, p: usize) -> Self {
        ControllerSS { a_k: DMatrix::zeros(0, 0), b_k: DMatrix::zeros(0, p), c_k: DMatrix::zeros(m, 0), d_k: DMatrix::zeros(m, p) }
    }

    pub fn states(&self) -> usize {
        self.a_k.nrows()
    }

    /// Realize `u = U (y - G u)` with shift registers holding the last
    /// `L_U - 1` values of `e = y - G u` and the last `L_G - 1` values of `u`.
    pub fn from_fir(u: &FirTm, g_hat: &FirTm) -> Result<Self> {
        if g_hat.coeff(0).iter().any(|&v| v != 0.0) {
            return Err(Error::IllPosedFeedthrough);
        }
        let (m, p) = (u.rows(), u.cols());
        if g_hat.rows() != p || g_hat.cols() != m {
            return Err(Error::Dimension("U and plant model shapes disagree".into()));
        }
        let ne = (u.horizon() - 1) * p;
        let nu = (g_hat.horizon() - 1) * m;
        let nk = ne + nu;
        let d_k = u.coeff(0);
        // e_t = y_t - H xi_u, H = [G_1 .. G_{L_G - 1}]
        let mut h = DMatrix::zeros(p, nu);
        for k in 1..g_hat.horizon() {
            h.view_mut((0, (k - 1) * m), (p, m)).copy_from(&g_hat.coeff(k));
        }
        let mut c_k = DMatrix::zeros(m, nk);
        for k in 1..u.horizon() {
            c_k.view_mut((0, (k - 1) * p), (m, p)).copy_from(&u.coeff(k));
        }
        if nu > 0 {
            let cu = -(&d_k * &h);
            c_k.view_mut((0, ne), (m, nu)).copy_from(&cu);
        }
        let mut a_k = DMatrix::zeros(nk, nk);
        let mut b_k = DMatrix::zeros(nk, p);
        if ne > 0 {
            if nu > 0 {
                a_k.view_mut((0, ne), (p, nu)).copy_from(&(-&h));
            }
            b_k.view_mut((0, 0), (p, p)).fill_with_identity();
            for i in p..ne {
                a_k[(i, i - p)] = 1.0;
            }
        }
        if nu > 0 {
            a_k.view_mut((ne, 0), (m, nk)).copy_from(&c_k);
            b_k.view_mut((ne, 0), (m, p)).copy_from(&d_k);
            for i in m..nu {
                a_k[(ne + i, ne + i - m)] = 1.0;
            }
        }
        ControllerSS::new(a_k, b_k, c_k, d_k)
    }
}

/// Interconnection driven by `(w, v)` with outputs `(y, u)`, where `u` is
/// the total plant input (controller output plus `w`).
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub m: usize,
    pub p: usize,
}

pub fn closed_loop(ss: &StateSpace, k: &ControllerSS) -> Result<ClosedLoop> {
    let (n, m, p) = (ss.n(), ss.m(), ss.p());
    let nk = k.states();
    if k.d_k.shape() != (m, p) {
        return Err(Error::Dimension(format!("controller is {:?}, plant needs {m}x{p}", k.d_k.shape())));
    }
    let nt = n + nk;
    let mut a = DMatrix::zeros(nt, nt);
    a.view_mut((0, 0), (n, n)).copy_from(&(&ss.a + &ss.b * &k.d_k * &ss.c));
    a.view_mut((0, n), (n, nk)).copy_from(&(&ss.b * &k.c_k));
    a.view_mut((n, 0), (nk, n)).copy_from(&(&k.b_k * &ss.c));
    a.view_mut((n, n), (nk, nk)).copy_from(&k.a_k);
    let mut b = DMatrix::zeros(nt, m + p);
    b.view_mut((0, 0), (n, m)).copy_from(&ss.b);
    b.view_mut((0, m), (n, p)).copy_from(&(&ss.b * &k.d_k));
    b.view_mut((n, m), (nk, p)).copy_from(&k.b_k);
    let mut c = DMatrix::zeros(p + m, nt);
    c.view_mut((0, 0), (p, n)).copy_from(&ss.c);
    c.view_mut((p, 0), (m, n)).copy_from(&(&k.d_k * &ss.c));
    c.view_mut((p, n), (m, nk)).copy_from(&k.c_k);
    let mut d = DMatrix::zeros(p + m, m + p);
    d.view_mut((0, m), (p, p)).fill_with_identity();
    d.view_mut((p, 0), (m, m)).fill_with_identity();
    d.view_mut((p, m), (m, p)).copy_from(&k.d_k);
    Ok(ClosedLoop { a, b, c, d, m, p })
}

impl ClosedLoop {
    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    /// Impulse response truncated to `len` coefficients, split into
    /// `(Y, W, U, Z)`: `y = Y v + W w`, `u = U v + Z w`.
    pub fn responses(&self, len: usize) -> Result<(FirTm, FirTm, FirTm, FirTm)> {
        let (m, p) = (self.m, self.p);
        let mut parts: [Vec<DMatrix<f64>>; 4] = Default::default();
        let mut ab = self.b.clone();
        for k in 0..len.max(1) {
            let h = if k == 0 {
                self.d.clone()
            } else {
                let h = &self.c * &ab;
                ab = &self.a * ab;
                h
            };
            parts[0].push(h.view((0, m), (p, p)).into_owned());
            parts[1].push(h.view((0, 0), (p, m)).into_owned());
            parts[2].push(h.view((p, m), (m, p)).into_owned());
            parts[3].push(h.view((p, 0), (m, m)).into_owned());
        }
        let [y, w, u, z] = parts;
        Ok((FirTm::new(y)?, FirTm::new(w)?, FirTm::new(u)?, FirTm::new(z)?))
    }
}

/// `P = A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A + Q` by fixed-point
/// iteration, stopping at `||P_{k+1} - P_k||_F <= 1e-12 max(1, ||P||_F)`.
pub fn dare_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::Dimension("DARE operands".into()));
    }
    let mut p = q.clone();
    let mut last = f64::INFINITY;
    for _ in 0..100_000 {
        let bp = b.transpose() * &p;
        let s = r + &bp * b;
        let gain = s.clone().lu().solve(&(&bp * a)).ok_or_else(|| Error::Dare(last))?;
        let mut next = a.transpose() * &p * a - (a.transpose() * bp.transpose()) * gain + q;
        next = 0.5 * (&next + next.transpose());
        last = (&next - &p).norm();
        if !last.is_finite() {
            return Err(Error::Dare(last));
        }
        p = next;
        if last <= 1e-12 * p.norm().max(1.0) {
            return Ok(p);
        }
    }
    Err(Error::Dare(last))
}

/// Kalman filter plus LQR gain in current-estimate form, and its cost.
pub fn optimal_lqg(ss: &StateSpace, weights: &LqgWeights) -> Result<(ControllerSS, f64)> {
    weights.validate(ss.m(), ss.p())?;
    let (n, p) = (ss.n(), ss.p());
    let (a, b, c) = (&ss.a, &ss.b, &ss.c);
    let qx = c.transpose() * &weights.q * c;
    let pc = dare_solve(a, b, &qx, &weights.r)?;
    let s = &weights.r + b.transpose() * &pc * b;
    let k = -s.lu().solve(&(b.transpose() * &pc * a)).ok_or(Error::Dare(f64::NAN))?;

    let wcov = b * b.transpose() * weights.sigma_w.powi(2);
    let vcov = DMatrix::<f64>::identity(p, p) * weights.sigma_v.powi(2);
    let sig = dare_solve(&a.transpose(), &c.transpose(), &wcov, &vcov)?;
    let innov = c * &sig * c.transpose() + &vcov;
    // L = Sigma C^T innov^{-1}; innov is singular only without measurement noise
    let inv = match innov.clone().try_inverse() {
        Some(x) if x.iter().all(|v| v.is_finite()) => x,
        _ => innov.pseudo_inverse(1e-12).map_err(|e| Error::Validation(e.to_string()))?,
    };
    let l = &sig * c.transpose() * inv;
    let i_lc = DMatrix::<f64>::identity(n, n) - &l * c;
    let abk = a + b * &k;
    let ctrl = ControllerSS::new(&abk * &i_lc, &abk * &l, &k * &i_lc, &k * &l)?;
    let j = closed_loop_cost(ss, &ctrl, weights)?;
    Ok((ctrl, j))
}

/// Exact `sqrt` of the LQG cost from the Lyapunov equation of the loop.
pub fn closed_loop_cost(ss: &StateSpace, k: &ControllerSS, weights: &LqgWeights) -> Result<f64> {
    let cl = closed_loop(ss, k)?;
    let rho = cl.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::ClosedLoopUnstable(rho));
    }
    let (m, p) = (ss.m(), ss.p());
    let mut left = DMatrix::zeros(p + m, p + m);
    left.view_mut((0, 0), (p, p)).copy_from(&psd_sqrt(&weights.q));
    left.view_mut((p, p), (m, m)).copy_from(&psd_sqrt(&weights.r));
    let mut right = DMatrix::zeros(m + p, m + p);
    for i in 0..m {
        right[(i, i)] = weights.sigma_w;
    }
    for i in 0..p {
        right[(m + i, m + i)] = weights.sigma_v;
    }
    let b = &cl.b * &right;
    let c = &left * &cl.c;
    let d = &left * &cl.d * &right;
    let x = dlyap(&cl.a, &(&b * b.transpose()))?;
    let j2 = (&c * x * c.transpose()).trace() + d.norm_squared();
    Ok(j2.max(0.0).sqrt())
}

/// Peak of `sigma_max(C (zI - A)^{-1} B + D)` over `n_grid` points of
/// `[0, pi]`, refined by golden-section search around the best point.
pub fn hinf_norm_statespace(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>, n_grid: usize) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(spectral_norm(d));
    }
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let n = n_grid.max(2);
    let f = |w: f64| sigma_max(&freq_response(a, b, c, Some(d), w));
    let grid = |i: usize| PI * i as f64 / (n - 1) as f64;
    let (mut best, mut at) = (0.0, 0);
    for i in 0..n {
        let v = f(grid(i));
        if v > best {
            best = v;
            at = i;
        }
    }
    let (mut lo, mut hi) = (grid(at.saturating_sub(1)), grid((at + 1).min(n - 1)));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        let (f1, f2) = (f(x1), f(x2));
        best = best.max(f1).max(f2);
        if f1 >= f2 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    Ok(best)
}

/// Inflation applied to grid H-infinity values when checking preconditions.
pub const HINF_INFLATION: f64 = 1.01;

/// `20 eps u + h(eps, alpha) + g(eps, u)`.
pub fn suboptimality_bound(eps: f64, alpha: f64, u_star_hinf: f64, g_star_hinf: f64, g_hat_hinf: f64) -> f64 {
    let h = crate::iop::h_factor(eps, alpha, g_hat_hinf);
    let k = 2.0 + u_star_hinf * g_star_hinf;
    let g = eps * g_star_hinf * k + eps * eps * k * k;
    20.0 * eps * u_star_hinf + h + g
}

/// Whether `eps < 1 / (5 u)` and `alpha` lies in `[sqrt(2) u / (1 - eps u), 1/eps)`,
/// with `u` the inflated norm.
pub fn bound_applicable(eps: f64, alpha: f64, u_star_hinf: f64) -> bool {
    let u = u_star_hinf * HINF_INFLATION;
    eps * u < 0.2 && alpha >= crate::iop::experiment_alpha(eps, u) * (1.0 - 1e-12) && alpha * eps < 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuboptReport {
    pub j_star: f64,
    pub j_hat: f64,
    /// `(J_hat^2 - J*^2) / J*^2`.
    pub relative_gap: f64,
    pub bound_rhs: f64,
    pub u_star_hinf: f64,
    pub g_star_hinf: f64,
    pub g_hat_hinf: f64,
    pub eps: f64,
    pub alpha: f64,
    pub bound_applicable: bool,
}

impl SuboptReport {
    pub fn new(j_star: f64, j_hat: f64, eps: f64, alpha: f64, u_star_hinf: f64, g_star_hinf: f64, g_hat_hinf: f64) -> Self {
        SuboptReport {
            j_star,
            j_hat,
            relative_gap: (j_hat * j_hat - j_star * j_star) / (j_star * j_star),
            bound_rhs: suboptimality_bound(eps, alpha, u_star_hinf, g_star_hinf, g_hat_hinf),
            u_star_hinf,
            g_star_hinf,
            g_hat_hinf,
            eps,
            alpha,
            bound_applicable: bound_applicable(eps, alpha, u_star_hinf),
        }
    }
}

/// Riccati baseline quantities that the experiments reuse.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub controller: ControllerSS,
    pub j_star: f64,
    /// Refined grid value of `||U*||_inf`.
    pub u_star_hinf: f64,
    pub g_star_hinf: f64,
    pub closed_loop: ClosedLoop,
}

pub fn baseline(ss: &StateSpace, weights: &LqgWeights) -> Result<Baseline> {
    let (controller, j_star) = optimal_lqg(ss, weights)?;
    let cl = closed_loop(ss, &controller)?;
    let (m, p) = (ss.m(), ss.p());
    // v -> u block
    let b_v = cl.b.columns(m, p).into_owned();
    let c_u = cl.c.rows(p, m).into_owned();
    let d_uv = cl.d.view((p, m), (m, p)).into_owned();
    let u_star_hinf = hinf_norm_statespace(&cl.a, &b_v, &c_u, &d_uv, 4096)?;
    let g_star_hinf = hinf_norm_statespace(&ss.a, &ss.b, &ss.c, &DMatrix::zeros(p, m), 4096)?;
    Ok(Baseline { controller, j_star, u_star_hinf, g_star_hinf, closed_loop: cl })
}
