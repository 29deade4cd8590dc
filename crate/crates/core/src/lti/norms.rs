//! H2 and H-infinity norms of FIR transfer matrices.
//!
//! The exact H-infinity norm uses the trace-band LMI: `||U||_inf <= gamma`
//! iff some `Q >= 0` satisfies `[[Q, U^],[U^T, gamma I]] >= 0` and
//! `sum_j Q_{j+k,j} = gamma delta_k I`, where `U^` stacks the coefficients.

use super::fir::FirTm;
use crate::error::{Error, Result};
use lqg_conic::{solve_warm, svec_index, svec_len, svec_to_mat, Cone, ConeProblem, CsrMatrix, Settings, WarmStart};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

pub fn h2_norm(g: &FirTm) -> f64 {
    g.coeffs().iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
}

/// `sqrt(sum_k ||L G_k R||_F^2)`.
pub fn h2_norm_weighted(g: &FirTm, left: &DMatrix<f64>, right: &DMatrix<f64>) -> f64 {
    g.coeffs().iter().map(|c| (left * c * right).norm_squared()).sum::<f64>().sqrt()
}

pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Default grid size `max(1024, 16 L)`.
pub fn default_grid(len: usize) -> usize {
    1024.max(16 * len)
}

fn grid_point(i: usize, n: usize) -> f64 {
    PI * i as f64 / (n - 1) as f64
}

/// `(value, index)` of the largest singular value over `n` points on `[0, pi]`.
fn grid_peak(g: &FirTm, n: usize) -> (f64, usize) {
    let n = n.max(2 * g.horizon()).max(2);
    let mut best = (0.0, 0);
    for i in 0..n {
        let s = sigma_max(&g.freq_response(grid_point(i, n)));
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

/// Max of `sigma_max(G(e^{jw}))` over `n_grid` uniform points of `[0, pi]`
/// (both ends included; real coefficients make the response conjugate
/// symmetric). `n_grid` is raised to `2L` if smaller. A lower bound.
pub fn hinf_norm_grid(g: &FirTm, n_grid: usize) -> f64 {
    grid_peak(g, n_grid).0
}

/// Grid lower bound refined by golden-section search around the best grid
/// point, and a Lipschitz upper bound `grid + (pi / 2(n-1)) sum_k k ||G_k||`.
pub fn hinf_grid_bounds(g: &FirTm, n_grid: usize) -> (f64, f64) {
    let n = n_grid.max(2 * g.horizon()).max(2);
    let (peak, i) = grid_peak(g, n);
    let f = |w: f64| sigma_max(&g.freq_response(w));
    let mut lo = grid_point(i.saturating_sub(1), n);
    let mut hi = grid_point((i + 1).min(n - 1), n);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = peak;
    for _ in 0..60 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        let (fa, fb) = (f(a), f(b));
        best = best.max(fa).max(fb);
        if fa >= fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    let lip: f64 = g.coeffs().iter().enumerate().map(|(k, c)| k as f64 * super::linalg::spectral_norm(c)).sum();
    (best, peak + PI / (2.0 * (n - 1) as f64) * lip)
}

/// Orientation used by the LMI: coefficients are made `r x c` with `r <= c`
/// so the auxiliary matrix `Q` (side `r L`) is as small as possible.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LmiShape {
    pub r: usize,
    pub c: usize,
    pub len: usize,
    pub transposed: bool,
}

impl LmiShape {
    pub fn for_dims(rows: usize, cols: usize, len: usize) -> Self {
        if rows > cols {
            LmiShape { r: cols, c: rows, len, transposed: true }
        } else {
            LmiShape { r: rows, c: cols, len, transposed: false }
        }
    }

    pub fn q_side(&self) -> usize {
        self.r * self.len
    }

    pub fn num_q(&self) -> usize {
        svec_len(self.q_side())
    }

    pub fn block_side(&self) -> usize {
        self.q_side() + self.c
    }

    /// Entry `(i, j)` of the oriented coefficient `k`, as `(row, col)` of the
    /// original coefficient.
    pub fn source(&self, i: usize, j: usize) -> (usize, usize) {
        if self.transposed { (j, i) } else { (i, j) }
    }

    pub fn oriented(&self, g: &FirTm) -> Vec<DMatrix<f64>> {
        g.coeffs().iter().map(|c| if self.transposed { c.transpose() } else { c.clone() }).collect()
    }
}

/// An affine expression `constant + sum coef * x[var]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine { terms: vec![], constant: c }
    }
    pub fn var(i: usize, coef: f64) -> Self {
        Affine { terms: vec![(i, coef)], constant: 0.0 }
    }
    fn scaled(&self, s: f64) -> Self {
        Affine { terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(), constant: self.constant * s }
    }
}

/// Rows of `s = b - A x` with `s` constrained to a cone.
#[derive(Debug, Default)]
pub(crate) struct RowBuilder {
    pub triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl RowBuilder {
    /// Append a row asking that `s_row = e(x)`.
    fn push(&mut self, e: &Affine) {
        let r = self.b.len();
        for &(i, c) in &e.terms {
            self.triplets.push((r, i, -c));
        }
        self.b.push(e.constant);
    }

    /// Append `||U||_inf <= gamma`. `q_off` is where the svec of `Q` starts
    /// in `x`; `u(k, i, j)` gives entry `(i, j)` of oriented coefficient `k`.
    pub fn push_hinf_lmi(&mut self, shape: &LmiShape, q_off: usize, u: impl Fn(usize, usize, usize) -> Affine, gamma: &Affine) {
        let (r, len) = (shape.r, shape.len);
        let qs = shape.q_side();
        let qvar = |i: usize, j: usize| {
            let scale = if i == j { 1.0 } else { FRAC_1_SQRT_2 };
            (q_off + svec_index(i, j, qs), scale)
        };

        // trace-band equalities
        let before = self.b.len();
        for k in 0..len {
            for a in 0..r {
                for bb in 0..r {
                    if k == 0 && bb > a {
                        continue;
                    }
                    let mut e = Affine::default();
                    for j in 0..len - k {
                        e.terms.push(qvar((j + k) * r + a, j * r + bb));
                    }
                    if k == 0 && a == bb {
                        let g = gamma.scaled(-1.0);
                        e.terms.extend(g.terms);
                        e.constant += g.constant;
                    }
                    self.push(&e);
                }
            }
        }
        self.cones.push(Cone::Zero(self.b.len() - before));

        // PSD block [[Q, U^],[U^T, gamma I]] in svec order
        let side = shape.block_side();
        for j in 0..side {
            for i in j..side {
                let e = if i < qs {
                    Affine::var(q_off + svec_index(i, j, qs), 1.0)
                } else if j < qs {
                    u(j / r, j % r, i - qs).scaled(SQRT_2)
                } else if i == j {
                    gamma.clone()
                } else {
                    Affine::constant(0.0)
                };
                self.push(&e);
            }
        }
        self.cones.push(Cone::Psd(side));
    }

    pub fn into_parts(self, ncols: usize) -> (CsrMatrix, Vec<f64>, Vec<Cone>) {
        let m = self.b.len();
        (CsrMatrix::from_triplets(m, ncols, self.triplets), self.b, self.cones)
    }
}

/// Turn an approximate LMI solution into a guaranteed bound: repair the band
/// equalities in the first block column, then absorb any negative eigenvalue
/// `-eta` of the block matrix by `Q += eta I`, `gamma += L eta`.
pub(crate) fn certify_hinf(coeffs: &[DMatrix<f64>], q: &DMatrix<f64>, gamma: f64) -> f64 {
    let r = coeffs[0].nrows();
    let c = coeffs[0].ncols();
    let len = coeffs.len();
    let qs = r * len;
    let mut qf = 0.5 * (q + q.transpose());
    for k in 0..len {
        let mut band = DMatrix::<f64>::zeros(r, r);
        for j in 0..len - k {
            band += qf.view(((j + k) * r, j * r), (r, r));
        }
        let mut target = DMatrix::zeros(r, r);
        if k == 0 {
            target.fill_with_identity();
            target *= gamma;
        }
        let fix = target - band;
        if k == 0 {
            let sym = 0.5 * (&fix + fix.transpose());
            let mut blk = qf.view_mut((0, 0), (r, r));
            blk += sym;
        } else {
            {
                let mut blk = qf.view_mut((k * r, 0), (r, r));
                blk += &fix;
            }
            let mut blk = qf.view_mut((0, k * r), (r, r));
            blk += fix.transpose();
        }
    }
    let side = qs + c;
    let mut m = DMatrix::zeros(side, side);
    m.view_mut((0, 0), (qs, qs)).copy_from(&qf);
    for (k, uk) in coeffs.iter().enumerate() {
        m.view_mut((k * r, qs), (r, c)).copy_from(uk);
        m.view_mut((qs, k * r), (c, r)).copy_from(&uk.transpose());
    }
    for a in 0..c {
        m[(qs + a, qs + a)] = gamma;
    }
    let lmin = SymmetricEigen::new(m.clone()).eigenvalues.min();
    // allowance for the eigensolver's own rounding
    let slack = 1e-13 * side as f64 * m.abs().max().max(1.0);
    let eta = (-lmin).max(0.0) + slack;
    gamma.max(0.0) + len as f64 * eta
}

/// Outcome of [`hinf_norm_sdp_detail`].
#[derive(Debug, Clone)]
pub struct HinfSdpReport {
    /// Certified upper bound on the norm.
    pub value: f64,
    /// Refined grid lower bound.
    pub lower: f64,
    pub iterations: usize,
    pub residuals: [f64; 3],
}

/// Exact H-infinity norm through the trace-band LMI, to within `tol`.
pub fn hinf_norm_sdp(g: &FirTm, tol: f64) -> Result<f64> {
    hinf_norm_sdp_detail(g, tol).map(|r| r.value)
}

pub fn hinf_norm_sdp_detail(g: &FirTm, tol: f64) -> Result<HinfSdpReport> {
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let g = g.trim();
    let scale = g.max_abs();
    if scale == 0.0 {
        return Ok(HinfSdpReport { value: 0.0, lower: 0.0, iterations: 0, residuals: [0.0; 3] });
    }
    let gs = g.scale(1.0 / scale);
    let shape = LmiShape::for_dims(gs.rows(), gs.cols(), gs.horizon());
    let coeffs = shape.oriented(&gs);
    let (lower, _) = hinf_grid_bounds(&gs, default_grid(gs.horizon()));

    let nq = shape.num_q();
    let gvar = nq;
    let mut rows = RowBuilder::default();
    rows.push_hinf_lmi(&shape, 0, |k, i, j| Affine::constant(coeffs[k][(i, j)]), &Affine::var(gvar, 1.0));
    let (a, b, cones) = rows.into_parts(nq + 1);
    let mut q = vec![0.0; nq + 1];
    q[gvar] = 1.0;
    let prob = ConeProblem::new(CsrMatrix::zeros(nq + 1, nq + 1), q, a, b, cones)?;

    let tol_s = tol / scale;
    let mut settings = Settings { tol: (0.1 * tol_s).min(1e-7), ..Settings::default() };
    let mut warm: Option<WarmStart> = None;
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut residuals = [f64::NAN; 3];
    for _round in 0..4 {
        let sol = solve_warm(&prob, &settings, warm.as_ref())?;
        iterations += sol.iterations;
        residuals = [sol.residuals.primal, sol.residuals.dual, sol.residuals.gap];
        let qm = svec_to_mat(&sol.x[..nq], shape.q_side());
        best = best.min(certify_hinf(&coeffs, &qm, sol.x[gvar]));
        if best - lower <= tol_s {
            break;
        }
        warm = Some(WarmStart::from(&sol));
        settings.tol *= 0.01;
        settings.max_iters *= 2;
    }
    if best - lower > tol_s.max(1e-6) * 1e3 {
        return Err(Error::HinfSdp { lower: lower * scale, upper: best * scale, residuals });
    }
    Ok(HinfSdpReport { value: best * scale, lower: lower * scale, iterations, residuals })
}
