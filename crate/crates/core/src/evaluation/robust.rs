use super::{baseline, closed_loop, ControllerSS};
use crate::error::{Error, Result};
use crate::iop::{h_factor, ResponseQuad};
use crate::lti::norms::{default_grid, hinf_grid_bounds};
use crate::lti::{fir_convolve, hinf_norm_sdp, markov_parameters, FirTm, LqgWeights, StateSpace};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Shift-register realization of a strictly proper FIR: the state holds
/// the last `L - 1` inputs.
pub fn fir_to_statespace(g: &FirTm) -> Result<StateSpace> {
    if g.coeff(0).iter().any(|&v| v != 0.0) {
        return Err(Error::IllPosedFeedthrough);
    }
    let (p, m, len) = (g.rows(), g.cols(), g.horizon());
    let n = (len - 1) * m;
    let mut a = DMatrix::zeros(n, n);
    for i in m..n {
        a[(i, i - m)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, m);
    if n > 0 {
        b.view_mut((0, 0), (m, m)).fill_with_identity();
    }
    let mut c = DMatrix::zeros(p, n);
    for k in 1..len {
        c.view_mut((0, (k - 1) * m), (p, m)).copy_from(&g.coeff(k));
    }
    StateSpace::new(a, b, c)
}

/// First `len` coefficients of `(I + M)^{-1}` for square `M`.
pub fn series_inverse(m: &FirTm, len: usize) -> Result<FirTm> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Dimension("series inverse needs a square FIR".into()));
    }
    let head = (DMatrix::identity(n, n) + m.coeff(0)).try_inverse().ok_or_else(|| Error::Precondition("I + M_0 is singular".into()))?;
    let mut x: Vec<DMatrix<f64>> = vec![head.clone()];
    for k in 1..len.max(1) {
        let mut acc = DMatrix::zeros(n, n);
        for j in 1..=k.min(m.horizon() - 1) {
            acc += m.coeff(j) * &x[k - j];
        }
        x.push(-(&head * acc));
    }
    FirTm::new(x)
}

/// `(||(I - G1 G2)^{-1}||_inf, 1 / (1 - ||G1||_inf ||G2||_inf))`, the
/// inverse computed by a truncated series of length `len`.
pub fn small_gain_check(g1: &FirTm, g2: &FirTm, len: usize) -> Result<(f64, f64)> {
    let prod = fir_convolve(g1, g2)?;
    let inv = series_inverse(&prod.scale(-1.0), len)?;
    let lhs = hinf_grid_bounds(&inv, default_grid(len)).0;
    let k = hinf_norm_sdp(g1, 1e-7)? * hinf_norm_sdp(g2, 1e-7)?;
    if k >= 1.0 {
        return Err(Error::Precondition(format!("norm product {k} is not below 1")));
    }
    Ok((lhs, 1.0 / (1.0 - k)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessTrial {
    pub trial: usize,
    pub delta_hinf: f64,
    pub spectral_radius: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub trials: Vec<RobustnessTrial>,
    pub fraction_stable: f64,
}

impl RobustnessReport {
    fn from_trials(trials: Vec<RobustnessTrial>) -> Self {
        let stable = trials.iter().filter(|t| t.stable).count();
        let fraction_stable = if trials.is_empty() { 0.0 } else { stable as f64 / trials.len() as f64 };
        RobustnessReport { trials, fraction_stable }
    }

    /// CSV `trial,delta_hinf,spectral_radius,stable`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,delta_hinf,spectral_radius,stable\n");
        for t in &self.trials {
            s.push_str(&format!("{},{:?},{:?},{}\n", t.trial, t.delta_hinf, t.spectral_radius, t.stable));
        }
        s
    }
}

fn loop_radius(g: &FirTm, k: &ControllerSS) -> Result<f64> {
    let plant = fir_to_statespace(g)?;
    closed_loop(&plant, k)?.spectral_radius()
}

/// Close the loop around `G_hat + Delta` for random strictly proper FIR
/// `Delta` scaled so that a certified upper bound on `||Delta||_inf`
/// equals `0.95 eps`.
pub fn robust_stability_check(g_hat: &FirTm, controller: &ControllerSS, eps: f64, trials: usize, seed: u64) -> Result<RobustnessReport> {
    if trials == 0 {
        return Err(Error::Validation("need at least one trial".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Validation("eps must be positive".into()));
    }
    let (p, m) = (g_hat.rows(), g_hat.cols());
    let len = g_hat.horizon().max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut coeffs = vec![DMatrix::zeros(p, m)];
        for _ in 1..len {
            coeffs.push(DMatrix::from_fn(p, m, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            }));
        }
        let raw = FirTm::new(coeffs)?;
        let n_grid = default_grid(len).max(64 * len).max(4096);
        let (_, upper) = hinf_grid_bounds(&raw, n_grid);
        let delta = raw.scale(0.95 * eps / upper);
        let (delta_hinf, _) = hinf_grid_bounds(&delta, n_grid);
        let rho = loop_radius(&g_hat.add(&delta)?, controller)?;
        out.push(RobustnessTrial { trial, delta_hinf, spectral_radius: rho, stable: rho < 1.0 });
    }
    Ok(RobustnessReport::from_trials(out))
}

/// Small-gain tightness search: `Delta = +-0.95 eps z^{-k}` for delays
/// `k = 1..=max_delay`. Each has `||Delta||_inf = 0.95 eps` exactly and
/// together they sweep the phase of the loop gain.
pub fn adversarial_stability_check(g_hat: &FirTm, controller: &ControllerSS, eps: f64, max_delay: usize) -> Result<RobustnessReport> {
    let (p, m) = (g_hat.rows(), g_hat.cols());
    let mut out = Vec::new();
    for k in 1..=max_delay {
        for sign in [1.0, -1.0] {
            let mut coeffs = vec![DMatrix::zeros(p, m); k + 1];
            coeffs[k] = DMatrix::from_fn(p, m, |i, j| if i == j { sign * 0.95 * eps } else { 0.0 });
            let delta = FirTm::new(coeffs)?;
            let rho = loop_radius(&g_hat.add(&delta)?, controller)?;
            out.push(RobustnessTrial { trial: out.len(), delta_hinf: 0.95 * eps, spectral_radius: rho, stable: rho < 1.0 });
        }
    }
    Ok(RobustnessReport::from_trials(out))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `eps ||U*||_inf`.
    pub eta: f64,
    pub gamma_tilde: f64,
    pub delta_hinf: f64,
    pub tail_len: usize,
    /// Max coefficient residual of the affine constraints against `G_hat`.
    pub residual: f64,
    pub feasible: bool,
    pub u_tilde_hinf: f64,
    /// `sqrt(2) ||U*|| / (1 - eps ||U*||)`.
    pub u_tilde_bound: f64,
    pub norm_bound_ok: bool,
    /// `||[sqrt(1+h) Y~, W~; U~, Z~]||_H2 / (1 - eps gamma~)`.
    pub witness_cost: f64,
    /// `sqrt(J*^2 + (h + g) ||Y*||^2) / (1 - (1 + sqrt 2) eta)`.
    pub chain_bound: f64,
    pub chain_ok: bool,
}

/// Build the responses of the optimal controller on `G_hat` from those on
/// the true plant and check that they are feasible for the robust program.
pub fn e1_witness_check(ss_true: &StateSpace, g_hat: &FirTm, eps: f64, alpha: f64, l_tail: Option<usize>) -> Result<WitnessReport> {
    let (m, p) = (ss_true.m(), ss_true.p());
    if g_hat.rows() != p || g_hat.cols() != m {
        return Err(Error::Dimension("estimate and true plant differ in shape".into()));
    }
    let weights = LqgWeights::identity(m, p);
    let base = baseline(ss_true, &weights)?;
    let u_star = base.u_star_hinf;
    let eta = eps * u_star;
    if !(eta < 0.2) {
        return Err(Error::Precondition(format!("eps ||U*|| = {eta} must be below 1/5")));
    }
    let len = match l_tail {
        Some(l) => l,
        None => {
            let rho = base.closed_loop.spectral_radius()?;
            if rho == 0.0 {
                base.closed_loop.a.nrows() + 1
            } else {
                ((1e-8f64).ln() / rho.ln()).ceil().clamp(1.0, 5000.0) as usize
            }
        }
    }
    .max(g_hat.horizon());

    let (ys, _, us, zs) = base.closed_loop.responses(len)?;
    let g_true = markov_parameters(ss_true, len)?;
    let delta = g_true.sub(g_hat)?.truncate(len);
    let n_grid = default_grid(len).max(4096);
    let delta_hinf = hinf_grid_bounds(&delta, n_grid).1;
    if delta_hinf > eps {
        return Err(Error::Precondition(format!("||G* - G_hat||_inf = {delta_hinf} exceeds eps = {eps}")));
    }

    let x = series_inverse(&fir_convolve(&delta, &us)?.truncate(len), len)?;
    let y_t = fir_convolve(&ys, &x)?.truncate(len);
    let u_t = fir_convolve(&us, &x)?.truncate(len);
    let w_t = fir_convolve(&y_t, g_hat)?.truncate(len);
    let xz = series_inverse(&fir_convolve(&us, &delta)?.truncate(len), len)?;
    let z_t = fir_convolve(&xz, &zs)?.truncate(len);
    let quad = ResponseQuad { y: y_t, u: u_t, w: w_t, z: z_t };

    // the constraints only see coefficients below the truncation horizon
    let check = |f: FirTm| f.truncate(len).max_abs();
    let r1 = check(quad.y.sub(&fir_convolve(g_hat, &quad.u)?)?.sub(&FirTm::identity(p))?);
    let r2 = check(quad.w.sub(&fir_convolve(g_hat, &quad.z)?)?);
    let r3 = check(quad.w.sub(&fir_convolve(&quad.y, g_hat)?)?);
    let r4 = check(quad.z.sub(&fir_convolve(&quad.u, g_hat)?)?.sub(&FirTm::identity(m))?);
    let residual = r1.max(r2).max(r3).max(r4);
    let scale = 1.0 + [&quad.y, &quad.u, &quad.w, &quad.z].iter().map(|f| f.max_abs()).fold(0.0, f64::max);

    let u_tilde_hinf = hinf_grid_bounds(&quad.u, n_grid).1;
    let u_tilde_bound = std::f64::consts::SQRT_2 * u_star / (1.0 - eta);

    let g_hat_hinf = hinf_grid_bounds(g_hat, default_grid(g_hat.horizon())).0;
    let h = h_factor(eps, alpha, g_hat_hinf);
    let k = 2.0 + u_star * base.g_star_hinf;
    let g = eps * base.g_star_hinf * k + eps * eps * k * k;
    let gamma_tilde = std::f64::consts::SQRT_2 * eta / (eps * (1.0 - eta));
    let witness_cost = quad.cost_squared(h, &weights).sqrt() / (1.0 - eps * gamma_tilde);
    let y_star_h2 = crate::lti::h2_norm(&ys);
    let chain_bound = (base.j_star.powi(2) + (h + g) * y_star_h2.powi(2)).sqrt() / (1.0 - (1.0 + std::f64::consts::SQRT_2) * eta);

    Ok(WitnessReport {
        eta,
        gamma_tilde,
        delta_hinf,
        tail_len: len,
        residual,
        feasible: residual <= 1e-9 * scale,
        u_tilde_hinf,
        u_tilde_bound,
        norm_bound_ok: u_tilde_hinf <= u_tilde_bound + 1e-6,
        witness_cost,
        chain_bound,
        chain_ok: witness_cost <= chain_bound * (1.0 + 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fir_realization_reproduces_markov() {
        let g = FirTm::scalar(&[0.0, 1.0, -0.5, 0.25]);
        let ss = fir_to_statespace(&g).unwrap();
        let back = markov_parameters(&ss, 4).unwrap();
        assert_eq!(back.coeffs(), g.coeffs());
    }

    #[test]
    fn series_inverse_of_delay() {
        let m = FirTm::scalar(&[0.0, 0.5]);
        let x = series_inverse(&m, 5).unwrap();
        let taps: Vec<f64> = x.coeffs().iter().map(|c| c[(0, 0)]).collect();
        assert_eq!(taps, vec![1.0, -0.5, 0.25, -0.125, 0.0625]);
    }

    #[test]
    fn zero_controller_is_robust() {
        let g = FirTm::scalar(&[0.0, 0.5, 0.2]);
        let r = robust_stability_check(&g, &ControllerSS::zero(1, 1), 0.3, 20, 1).unwrap();
        assert_eq!(r.fraction_stable, 1.0);
        assert!(r.to_csv().starts_with("trial,delta_hinf,spectral_radius,stable\n"));
    }
}
