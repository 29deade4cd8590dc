use super::{h_factor, responses_from_u, ResponseQuad, SynthesisConfig};
use crate::error::{Error, Result};
use crate::lti::norms::{certify_hinf, default_grid, hinf_grid_bounds, Affine, LmiShape, RowBuilder};
use crate::lti::{hinf_norm_sdp, psd_sqrt, FirTm, LqgWeights};
use lqg_conic::{solve, svec_to_mat, ConeProblem, CsrMatrix, Status};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

/// The inner program at a fixed gamma: the quadratic cost in the entries of
/// `U` plus the LMI block for `||U||_inf <= min(gamma, alpha)`.
#[derive(Debug, Clone)]
pub struct InnerProblem {
    pub cone: ConeProblem,
    /// Cost offset: the squared objective is `cone objective + constant`.
    pub constant: f64,
    /// Number of leading variables holding `U`.
    pub num_u: usize,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub gamma: f64,
    pub bound: f64,
    pub u: FirTm,
    /// `sqrt` of the squared objective at `u`.
    pub phi: f64,
    /// Certified upper bound on `||u||_inf`.
    pub u_hinf: f64,
    /// The unconstrained minimizer already met the bound.
    pub fast_path: bool,
    pub status: Option<Status>,
    pub iterations: usize,
    pub residuals: [f64; 3],
}

/// `||M x + c||^2` as `1/2 x^T P x + q^T x + c^T c`.
#[derive(Debug, Clone)]
struct QuadForm {
    m: DMatrix<f64>,
    c: DVector<f64>,
}

impl QuadForm {
    fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.m * x + &self.c).norm_squared()
    }
}

/// Reusable state for repeated inner solves on one model.
pub struct InnerSolver {
    g_hat: FirTm,
    cfg: SynthesisConfig,
    pub h: f64,
    pub g_hat_hinf: f64,
    quad: QuadForm,
    shape: LmiShape,
    unconstrained: Option<(DVector<f64>, f64)>,
    memo: HashMap<u64, InnerSolution>,
}

fn weighted_vec(q: &ResponseQuad, h: f64, w: &LqgWeights, out: &mut Vec<f64>) {
    out.clear();
    let qh = psd_sqrt(&w.q);
    let rh = psd_sqrt(&w.r);
    let sy = (1.0 + h).sqrt() * w.sigma_v;
    let mut push = |f: &FirTm, left: &DMatrix<f64>, s: f64| {
        for c in f.coeffs() {
            out.extend((left * c * s).iter());
        }
    };
    push(&q.y, &qh, sy);
    push(&q.w, &qh, w.sigma_w);
    push(&q.u, &rh, w.sigma_v);
    push(&q.z, &rh, w.sigma_w);
}

impl InnerSolver {
    pub fn new(g_hat: &FirTm, cfg: &SynthesisConfig) -> Result<Self> {
        cfg.validate()?;
        if !g_hat.is_strictly_proper() && g_hat.coeff(0).iter().any(|&v| v != 0.0) {
            return Err(Error::IllPosedFeedthrough);
        }
        let (p, m) = (g_hat.rows(), g_hat.cols());
        let weights = cfg.weights_for(m, p);
        weights.validate(m, p)?;
        let g_hat_hinf = hinf_norm_sdp(g_hat, 1e-7)?;
        let h = h_factor(cfg.eps, cfg.alpha, g_hat_hinf);

        let nx = cfg.l_u * m * p;
        let mut buf = Vec::new();
        weighted_vec(&responses_from_u(g_hat, &FirTm::zeros(m, p, cfg.l_u))?, h, &weights, &mut buf);
        let c = DVector::from_vec(buf.clone());
        let mut mat = DMatrix::zeros(c.len(), nx);
        let mut x = vec![0.0; nx];
        for idx in 0..nx {
            x[idx] = 1.0;
            weighted_vec(&responses_from_u(g_hat, &u_from_vec(&x, m, p, cfg.l_u))?, h, &weights, &mut buf);
            x[idx] = 0.0;
            for (r, v) in buf.iter().enumerate() {
                mat[(r, idx)] = v - c[r];
            }
        }
        if mat.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("inner objective".into()));
        }
        Ok(InnerSolver {
            g_hat: g_hat.clone(),
            cfg: cfg.clone(),
            h,
            g_hat_hinf,
            quad: QuadForm { m: mat, c },
            shape: LmiShape::for_dims(m, p, cfg.l_u),
            unconstrained: None,
            memo: HashMap::new(),
        })
    }

    pub fn model(&self) -> &FirTm {
        &self.g_hat
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.cfg
    }

    fn dims(&self) -> (usize, usize) {
        (self.g_hat.cols(), self.g_hat.rows())
    }

    /// Minimizer without the norm constraint, and a certified upper bound on
    /// its H-infinity norm.
    pub fn unconstrained(&mut self) -> Result<(FirTm, f64, f64)> {
        let (m, p) = self.dims();
        if self.unconstrained.is_none() {
            let mtm = self.quad.m.transpose() * &self.quad.m;
            let rhs = -(self.quad.m.transpose() * &self.quad.c);
            let x = match mtm.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => self.quad.m.clone().svd(true, true).solve(&(-&self.quad.c), 1e-12).map_err(|e| Error::Validation(e.to_string()))?,
            };
            let u = u_from_vec(x.as_slice(), m, p, self.cfg.l_u);
            let upper = hinf_grid_bounds(&u, default_grid(u.horizon()).max(4096)).1;
            self.unconstrained = Some((x, upper));
        }
        let (x, upper) = self.unconstrained.as_ref().unwrap();
        Ok((u_from_vec(x.as_slice(), m, p, self.cfg.l_u), self.quad.value(x).sqrt(), *upper))
    }

    /// Build the conic program for bound `min(gamma, alpha)`.
    pub fn assemble(&self, gamma: f64) -> Result<InnerProblem> {
        self.check_gamma(gamma)?;
        let bound = gamma.min(self.cfg.alpha);
        let (m, p) = self.dims();
        let nx = self.quad.m.ncols();
        let nq = self.shape.num_q();
        let n = nx + nq;
        let pm = 2.0 * self.quad.m.transpose() * &self.quad.m;
        let qv = 2.0 * self.quad.m.transpose() * &self.quad.c;
        let mut trip = Vec::new();
        for j in 0..nx {
            for i in 0..nx {
                if pm[(i, j)] != 0.0 {
                    trip.push((i, j, pm[(i, j)]));
                }
            }
        }
        let mut q = vec![0.0; n];
        q[..nx].copy_from_slice(qv.as_slice());

        let shape = self.shape;
        let mut rows = RowBuilder::default();
        rows.push_hinf_lmi(
            &shape,
            nx,
            |k, i, j| {
                let (si, sj) = shape.source(i, j);
                Affine::var(var_index(k, si, sj, m, p), 1.0)
            },
            &Affine::constant(bound),
        );
        let (a, b, cones) = rows.into_parts(n);
        let cone = ConeProblem::new(CsrMatrix::from_triplets(n, n, trip), q, a, b, cones)?;
        Ok(InnerProblem { cone, constant: self.quad.c.norm_squared(), num_u: nx, bound })
    }

    fn check_gamma(&self, gamma: f64) -> Result<()> {
        if !(gamma >= 0.0 && gamma * self.cfg.eps < 1.0) {
            return Err(Error::Precondition(format!("gamma = {gamma} outside [0, 1/eps)")));
        }
        Ok(())
    }

    pub fn solve(&mut self, gamma: f64) -> Result<InnerSolution> {
        self.check_gamma(gamma)?;
        if let Some(s) = self.memo.get(&gamma.to_bits()) {
            return Ok(s.clone());
        }
        let sol = self.solve_uncached(gamma)?;
        self.memo.insert(gamma.to_bits(), sol.clone());
        Ok(sol)
    }

    fn solve_uncached(&mut self, gamma: f64) -> Result<InnerSolution> {
        let bound = gamma.min(self.cfg.alpha);
        let (m, p) = self.dims();
        let l_u = self.cfg.l_u;
        let (u, phi, upper) = self.unconstrained()?;
        let base = InnerSolution { gamma, bound, u, phi, u_hinf: upper, fast_path: true, status: None, iterations: 0, residuals: [0.0; 3] };
        if upper <= bound {
            return Ok(base);
        }
        if bound == 0.0 {
            let u = FirTm::zeros(m, p, l_u);
            let phi = self.quad.c.norm();
            return Ok(InnerSolution { u, phi, u_hinf: 0.0, fast_path: false, ..base });
        }
        let prob = self.assemble(gamma)?;
        let sol = solve(&prob.cone, &self.cfg.settings())?;
        let nx = prob.num_u;
        let mut x = DVector::from_column_slice(&sol.x[..nx]);
        let u0 = u_from_vec(x.as_slice(), m, p, l_u);
        let qm = svec_to_mat(&sol.x[nx..], self.shape.q_side());
        let cert = certify_hinf(&self.shape.oriented(&u0), &qm, bound);
        // shrink onto the feasible set if the solver landed slightly outside
        let u_hinf = if cert > bound {
            x *= bound / cert;
            bound
        } else {
            cert
        };
        let u = u_from_vec(x.as_slice(), m, p, l_u);
        Ok(InnerSolution {
            gamma,
            bound,
            u,
            phi: self.quad.value(&x).sqrt(),
            u_hinf,
            fast_path: false,
            status: Some(sol.status),
            iterations: sol.iterations,
            residuals: [sol.residuals.primal, sol.residuals.dual, sol.residuals.gap],
        })
    }
}

fn var_index(k: usize, i: usize, j: usize, m: usize, p: usize) -> usize {
    k * m * p + j * m + i
}

fn u_from_vec(x: &[f64], m: usize, p: usize, l_u: usize) -> FirTm {
    let coeffs = (0..l_u).map(|k| DMatrix::from_column_slice(m, p, &x[k * m * p..(k + 1) * m * p])).collect();
    FirTm::new(coeffs).expect("finite coefficients of consistent shape")
}

pub fn assemble_inner_problem(g_hat: &FirTm, cfg: &SynthesisConfig, gamma: f64) -> Result<InnerProblem> {
    InnerSolver::new(g_hat, cfg)?.assemble(gamma)
}

/// `(U, phi(gamma))` for a single gamma.
pub fn inner_solve(g_hat: &FirTm, cfg: &SynthesisConfig, gamma: f64) -> Result<(FirTm, f64)> {
    let s = InnerSolver::new(g_hat, cfg)?.solve(gamma)?;
    Ok((s.u, s.phi))
}
