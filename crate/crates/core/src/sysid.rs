//! Single-trajectory least-squares FIR identification and its error bounds.

use crate::error::{Error, Result};
use crate::lti::{hinf_norm_sdp, markov_parameters, phi_margin, spectral_norm, FirTm, StateSpace, Trajectory};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Stacked least-squares data: row `i` of `u` is
/// `[u_t^T, u_{t-1}^T, ..., u_{t-T+1}^T]` and row `i` of `y` is `y_t^T`,
/// for `t = T-1+i`.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub window: usize,
    pub m: usize,
}

impl RegressionData {
    pub fn rows(&self) -> usize {
        self.y.nrows()
    }
}

/// Constants of the sample-size bound. Their values are problem dependent
/// and must be supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBoundParams {
    pub r_w: f64,
    pub r_v: f64,
    pub r_e: f64,
    pub c: f64,
}

impl Default for SampleBoundParams {
    fn default() -> Self {
        SampleBoundParams { r_w: 1.0, r_v: 1.0, r_e: 1.0, c: 1.0 }
    }
}

impl SampleBoundParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.r_w, self.r_v, self.r_e].iter().all(|v| v.is_finite() && *v >= 0.0) && self.c.is_finite() && self.c > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("R_w, R_v, R_e must be finite and nonnegative, c positive".into()))
        }
    }

    pub fn r_sum(&self) -> f64 {
        self.r_w + self.r_v + self.r_e
    }
}

pub fn build_regression(traj: &Trajectory, window: usize) -> Result<RegressionData> {
    if window == 0 {
        return Err(Error::Validation("FIR window must be positive".into()));
    }
    let horizon = traj.horizon();
    if horizon < window {
        return Err(Error::InsufficientData { horizon, window });
    }
    let m = traj.inputs[0].len();
    let p = traj.outputs[0].len();
    let n_rows = horizon - window + 1;
    let mut u = DMatrix::zeros(n_rows, window * m);
    let mut y = DMatrix::zeros(n_rows, p);
    for i in 0..n_rows {
        let t = window - 1 + i;
        for k in 0..window {
            for j in 0..m {
                u[(i, k * m + j)] = traj.inputs[t - k][j];
            }
        }
        for j in 0..p {
            y[(i, j)] = traj.outputs[t][j];
        }
    }
    Ok(RegressionData { y, u, window, m })
}

/// OLS result with the diagnostics the estimator discards.
#[derive(Debug, Clone)]
pub struct OlsEstimate {
    /// Strictly proper estimate (`G_0` zeroed).
    pub g_hat: FirTm,
    /// The fitted `G_0` before zeroing.
    pub raw_g0: DMatrix<f64>,
    /// Singular values of the regressor, descending.
    pub singular_values: Vec<f64>,
}

/// Relative singular-value floor below which the regressor is rejected.
pub const CONDITIONING_THRESHOLD: f64 = 1e-10;

pub fn ols_estimate(data: &RegressionData) -> Result<FirTm> {
    ols_estimate_detail(data).map(|e| e.g_hat)
}

pub fn ols_estimate_detail(data: &RegressionData) -> Result<OlsEstimate> {
    let cols = data.u.ncols();
    let svd = data.u.clone().svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    if sv.len() < cols || smax == 0.0 || sv[cols - 1] < CONDITIONING_THRESHOLD * smax {
        return Err(Error::Unidentifiable { singular_values: sv });
    }
    // X = argmin ||U X - Y||, X = G^T stacked
    let x = svd.solve(&data.y, 0.0).map_err(|e| Error::Validation(e.to_string()))?;
    let row = x.transpose();
    let (p, m) = (row.nrows(), data.m);
    let mut coeffs: Vec<DMatrix<f64>> = (0..data.window).map(|k| row.view((0, k * m), (p, m)).into_owned()).collect();
    let raw_g0 = std::mem::replace(&mut coeffs[0], DMatrix::zeros(p, m));
    let g_hat = FirTm::new(coeffs)?.into_strictly_proper()?;
    Ok(OlsEstimate { g_hat, raw_g0, singular_values: sv })
}

/// `Phi(A) ||C|| ||B|| rho^T / (1 - rho)`, the geometric bound on
/// `sum_{k >= T} ||C A^k B||`.
///
/// In terms of the Markov coefficients `G_k = C A^{k-1} B` this covers the
/// tail from index `T + 1` on. A nilpotent `A` (rho = 0) gets the exact sum.
pub fn truncation_tail_bound(ss: &StateSpace, window: usize) -> Result<f64> {
    let rho = ss.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Precondition(format!("tail bound needs a stable plant, spectral radius {rho}")));
    }
    let (nc, nb) = (spectral_norm(&ss.c), spectral_norm(&ss.b));
    if nc == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    if rho == 0.0 {
        // A^n = 0, so only finitely many terms survive
        let mut ak_b = ss.b.clone();
        for _ in 0..window {
            ak_b = &ss.a * ak_b;
        }
        let mut total = 0.0;
        for _ in window..ss.n().max(window) + 1 {
            total += spectral_norm(&(&ss.c * &ak_b));
            ak_b = &ss.a * ak_b;
        }
        return Ok(total);
    }
    let phi = phi_margin(&ss.a, None)?;
    Ok(phi * nc * nb * rho.powi(window as i32) / (1.0 - rho))
}

/// Smallest `T` with `T >= log(eps (1-rho) / (2 Phi ||C|| ||B||)) / log(rho)`,
/// at least 1. A nilpotent `A` returns `n + 1`, the exact FIR length.
pub fn choose_fir_length(eps: f64, ss: &StateSpace) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::Validation("eps must be positive".into()));
    }
    let rho = ss.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Precondition(format!("FIR length needs a stable plant, spectral radius {rho}")));
    }
    if rho == 0.0 {
        return Ok(ss.n() + 1);
    }
    let k = phi_margin(&ss.a, None)? * spectral_norm(&ss.c) * spectral_norm(&ss.b);
    if k == 0.0 {
        return Ok(1);
    }
    let x = (eps * (1.0 - rho) / (2.0 * k)).ln() / rho.ln();
    if x <= 1.0 {
        return Ok(1);
    }
    // absorb rounding when the threshold is an integer
    Ok((x - 1e-12).ceil() as usize)
}

/// Real-valued first branch `4 T (R_w + R_v + R_e)^2 / (sigma_u^2 eps^2)`.
pub fn first_branch_bound(eps: f64, window: usize, params: &SampleBoundParams, sigma_u: f64) -> f64 {
    4.0 * window as f64 * params.r_sum().powi(2) / (sigma_u * sigma_u * eps * eps)
}

/// Smallest trajectory length meeting both branches of the sample bound.
///
/// The implicit branch `N > c T m log^2(2Tm) log^2(2Nm)` is solved by
/// fixed-point iteration from `N_0 = c T m`, then walked down to the
/// smallest integer that still satisfies it.
pub fn required_trajectory_length(eps: f64, window: usize, params: &SampleBoundParams, sigma_u: f64, m: usize) -> Result<usize> {
    if !(eps > 0.0 && sigma_u > 0.0) || window == 0 || m == 0 {
        return Err(Error::Validation("eps, T, sigma_u and m must be positive".into()));
    }
    params.validate()?;
    let b1 = first_branch_bound(eps, window, params, sigma_u);
    let n1 = b1.floor() + 1.0;

    let tm = (window * m) as f64;
    let k = params.c * tm * (2.0 * tm).ln().powi(2);
    let g = |n: f64| k * (2.0 * n * m as f64).ln().max(0.0).powi(2);
    let mut n = params.c * tm;
    let mut converged = false;
    for _ in 0..100 {
        let next = g(n.max(1.0));
        if (next - n).abs() <= 1e-9 * n.max(1.0) {
            n = next;
            converged = true;
            break;
        }
        n = next;
    }
    if !converged || !n.is_finite() {
        return Err(Error::FixedPoint(format!("sample-size iteration stuck near N = {n}")));
    }
    let mut n2 = (n.floor() + 1.0).max(1.0);
    while n2 <= g(n2) {
        n2 += 1.0;
    }
    while n2 > 1.0 && n2 - 1.0 > g(n2 - 1.0) {
        n2 -= 1.0;
    }
    let n = n1.max(n2);
    if n > u64::MAX as f64 / 2.0 {
        return Err(Error::Validation(format!("required trajectory length {n:e} overflows")));
    }
    Ok(n as usize)
}

/// Horizon at which the geometric tail has dropped below `1e-8` of its
/// leading factor; `n + 1` for nilpotent `A`. Capped at 5000.
pub fn tail_horizon(ss: &StateSpace) -> Result<usize> {
    let rho = ss.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    if rho == 0.0 {
        return Ok(ss.n() + 1);
    }
    Ok(((1e-8f64).ln() / rho.ln()).ceil().clamp(1.0, 5000.0) as usize)
}

/// Pieces of the identification error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationError {
    /// `||G_hat - G*||_inf` over the first `L_tail + 1` coefficients (SDP) plus
    /// the geometric tail beyond them.
    pub oracle: f64,
    pub fir_part: f64,
    pub tail: f64,
    /// `sqrt(T) ||[G_hat_k - G*_k]|| + tail beyond T`, with `T` the horizon of `G_hat`.
    pub block_bound: f64,
    pub tail_horizon: usize,
}

pub fn estimation_error_hinf(g_hat: &FirTm, ss_true: &StateSpace) -> Result<EstimationError> {
    let rho = ss_true.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Precondition(format!("true plant must be stable, spectral radius {rho}")));
    }
    if g_hat.rows() != ss_true.p() || g_hat.cols() != ss_true.m() {
        return Err(Error::Dimension("estimate and true plant differ in shape".into()));
    }
    let lt = tail_horizon(ss_true)?.max(g_hat.horizon());
    let g_true = markov_parameters(ss_true, lt + 1)?;
    let diff = g_hat.sub(&g_true)?;
    let fir_part = hinf_norm_sdp(&diff, 1e-7)?;
    let tail = truncation_tail_bound(ss_true, lt)?;

    let t = g_hat.horizon();
    let head = diff.truncate(t);
    let beyond = if t >= 1 { truncation_tail_bound(ss_true, t - 1)? } else { 0.0 };
    let block_bound = (t as f64).sqrt() * spectral_norm(&head.block_row()) + beyond;
    Ok(EstimationError { oracle: fir_part + tail, fir_part, tail, block_bound, tail_horizon: lt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn scalar_traj(u: &[f64]) -> Trajectory {
        Trajectory {
            inputs: u.iter().map(|&v| DVector::from_element(1, v)).collect(),
            outputs: u.iter().map(|_| DVector::zeros(1)).collect(),
            states: None,
            process_noise: None,
            measurement_noise: None,
            seed: 0,
        }
    }

    #[test]
    fn regression_assembly() {
        let d = build_regression(&scalar_traj(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(d.u, DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 3.0, 2.0, 4.0, 3.0]));
        assert_eq!(build_regression(&scalar_traj(&[1.0, 2.0]), 2).unwrap().rows(), 1);
        assert!(matches!(build_regression(&scalar_traj(&[1.0]), 2), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn zero_inputs_are_unidentifiable() {
        let d = build_regression(&scalar_traj(&[0.0; 10]), 3).unwrap();
        assert!(matches!(ols_estimate(&d), Err(Error::Unidentifiable { .. })));
    }

    #[test]
    fn tail_bound_examples() {
        let ss = StateSpace::scalar(0.5, 1.0, 1.0);
        assert!((truncation_tail_bound(&ss, 4).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(truncation_tail_bound(&StateSpace::scalar(0.5, 0.0, 1.0), 4).unwrap(), 0.0);
    }

    #[test]
    fn fir_length_examples() {
        let ss = StateSpace::scalar(0.5, 1.0, 1.0);
        assert_eq!(choose_fir_length(0.125, &ss).unwrap(), 5);
        assert!(truncation_tail_bound(&ss, 5).unwrap() <= 0.0625);
        assert_eq!(choose_fir_length(4.0, &ss).unwrap(), 1);
        let mut last = usize::MAX;
        for k in 0..30 {
            let t = choose_fir_length(1e-9 * 2f64.powi(k), &ss).unwrap();
            assert!(t <= last);
            last = t;
        }
    }

    #[test]
    fn halving_eps_quadruples_first_branch() {
        let p = SampleBoundParams::default();
        let a = first_branch_bound(0.02, 5, &p, 1.0);
        let b = first_branch_bound(0.01, 5, &p, 1.0);
        assert_eq!(b, 4.0 * a);
    }

    #[test]
    fn trajectory_length_satisfies_both_branches() {
        let p = SampleBoundParams { r_w: 0.0, r_v: 0.0, r_e: 0.0, c: 2.0 };
        let (t, m) = (5usize, 2usize);
        let n = required_trajectory_length(0.1, t, &p, 1.0, m).unwrap() as f64;
        let tm = (t * m) as f64;
        let rhs = |n: f64| p.c * tm * (2.0 * tm).ln().powi(2) * (2.0 * n * m as f64).ln().powi(2);
        assert!(n > rhs(n));
        assert!(n - 1.0 <= rhs(n - 1.0));

        let p = SampleBoundParams::default();
        let n = required_trajectory_length(1e-3, t, &p, 1.0, m).unwrap() as f64;
        let b1 = first_branch_bound(1e-3, t, &p, 1.0);
        assert!(n > b1 && n - 1.0 <= b1);
    }
}
