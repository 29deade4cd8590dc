//! Operator-splitting iteration.
//!
//! The problem is equilibrated (Ruiz, uniform within SOC/PSD blocks so cone
//! membership is preserved), then iterated as
//!
//! ```text
//! (P + sigma I + A'RA) xt = sigma x - q + A'(R(b - s) + y)
//! st  = b - A xt
//! x   = a xt + (1-a) x
//! s+  = Proj_K(a st + (1-a) s + y/R)
//! y   = y + R(a st + (1-a) s - s+)
//! ```
//!
//! Internally `y` lives in the polar cone; it is negated on output.

use crate::cones::Cone;
use crate::kkt::KktSolver;
use crate::problem::{dot, ConeProblem, ConeSolution, ConicError, Residuals, Settings, Status, WarmStart};
use crate::sparse::CsrMatrix;

struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn equilibrate(p: &mut CsrMatrix, q: &mut [f64], a: &mut CsrMatrix, b: &mut [f64], cones: &[Cone], iters: usize) -> Scaling {
    let n = q.len();
    let m = b.len();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let clamp = |v: f64| v.clamp(1e-4, 1e4);
    for _ in 0..iters {
        let pn = p.col_inf_norms();
        let an = a.col_inf_norms();
        let dd: Vec<f64> = (0..n)
            .map(|j| {
                let v = pn[j].max(an[j]);
                if v < 1e-8 { 1.0 } else { 1.0 / v.sqrt() }
            })
            .collect();
        let rn = a.row_inf_norms();
        let mut ee: Vec<f64> = rn.iter().map(|&v| if v < 1e-8 { 1.0 } else { 1.0 / v.sqrt() }).collect();
        let mut off = 0;
        for cone in cones {
            let k = cone.dim();
            if matches!(cone, Cone::Soc(_) | Cone::Psd(_)) && k > 0 {
                let mean = rn[off..off + k].iter().sum::<f64>() / k as f64;
                let f = if mean < 1e-8 { 1.0 } else { 1.0 / mean.sqrt() };
                ee[off..off + k].iter_mut().for_each(|x| *x = f);
            }
            off += k;
        }
        let dd: Vec<f64> = dd.iter().zip(&d).map(|(x, cur)| clamp(x * cur) / cur).collect();
        let ee: Vec<f64> = ee.iter().zip(&e).map(|(x, cur)| clamp(x * cur) / cur).collect();
        p.scale(&dd, &dd);
        a.scale(&ee, &dd);
        d.iter_mut().zip(&dd).for_each(|(x, y)| *x *= y);
        e.iter_mut().zip(&ee).for_each(|(x, y)| *x *= y);
    }
    q.iter_mut().zip(&d).for_each(|(x, y)| *x *= y);
    b.iter_mut().zip(&e).for_each(|(x, y)| *x *= y);

    let c = if iters == 0 {
        1.0
    } else {
        let pn = p.col_inf_norms();
        let mean = if n > 0 { pn.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let s = mean.max(inf_norm(q));
        if s < 1e-8 { 1.0 } else { clamp(1.0 / s) }
    };
    if c != 1.0 {
        p.values.iter_mut().for_each(|v| *v *= c);
        q.iter_mut().for_each(|v| *v *= c);
    }
    Scaling { d, e, c }
}

fn project(cones: &[Cone], v: &mut [f64]) {
    let mut off = 0;
    for cone in cones {
        let k = cone.dim();
        cone.project(&mut v[off..off + k]);
        off += k;
    }
}

pub fn solve(prob: &ConeProblem, settings: &Settings) -> Result<ConeSolution, ConicError> {
    solve_warm(prob, settings, None)
}

pub fn solve_warm(prob: &ConeProblem, settings: &Settings, warm: Option<&WarmStart>) -> Result<ConeSolution, ConicError> {
    prob.validate()?;
    let n = prob.num_vars();
    let m = prob.num_rows();

    let mut p = prob.p.clone();
    let mut q = prob.q.clone();
    let mut a = prob.a.clone();
    let mut b = prob.b.clone();
    let sc = equilibrate(&mut p, &mut q, &mut a, &mut b, &prob.cones, settings.scaling_iters);

    let mut w = vec![1.0; m];
    let mut off = 0;
    for cone in &prob.cones {
        if let Cone::Zero(k) = cone {
            w[off..off + k].iter_mut().for_each(|x| *x = settings.eq_weight);
        }
        off += cone.dim();
    }

    let mut rho = settings.rho.clamp(settings.rho_min, settings.rho_max);
    let mut kkt = KktSolver::new(&p, &a, &w, settings.sigma);
    if !kkt.factor(rho) {
        return Err(ConicError::Factorization);
    }

    let (mut x, mut s, mut y) = match warm {
        Some(ws) if ws.x.len() == n && ws.s.len() == m && ws.y.len() == m => (
            ws.x.iter().zip(&sc.d).map(|(v, d)| v / d).collect::<Vec<_>>(),
            ws.s.iter().zip(&sc.e).map(|(v, e)| v * e).collect::<Vec<_>>(),
            ws.y.iter().zip(&sc.e).map(|(v, e)| -sc.c * v / e).collect::<Vec<_>>(),
        ),
        _ => (vec![0.0; n], vec![0.0; m], vec![0.0; m]),
    };

    let alpha = settings.relaxation;
    let sigma = settings.sigma;
    let mut rhs = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut st = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut v = vec![0.0; m];

    let mut res = Residuals { primal: f64::INFINITY, dual: f64::INFINITY, gap: f64::INFINITY };
    let mut status = Status::MaxIters;
    let mut iterations = 0;
    let mut half_mark: Option<(f64, f64)> = None;
    let b_norm = inf_norm(&prob.b);
    let q_norm = inf_norm(&prob.q);

    for k in 1..=settings.max_iters {
        iterations = k;
        for i in 0..m {
            tmp_m[i] = rho * w[i] * (b[i] - s[i]) + y[i];
        }
        a.mul_t_vec(&tmp_m, &mut rhs);
        for j in 0..n {
            rhs[j] += sigma * x[j] - q[j];
        }
        kkt.solve_in_place(&mut rhs);
        a.mul_vec(&rhs, &mut st);
        for i in 0..m {
            st[i] = b[i] - st[i];
        }
        for j in 0..n {
            x[j] = alpha * rhs[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            let rel = alpha * st[i] + (1.0 - alpha) * s[i];
            tmp_m[i] = rel;
            v[i] = rel + y[i] / (rho * w[i]);
        }
        project(&prob.cones, &mut v);
        for i in 0..m {
            y[i] += rho * w[i] * (tmp_m[i] - v[i]);
            s[i] = v[i];
        }

        // residuals in the original scaling
        a.mul_vec(&x, &mut ax);
        p.mul_vec(&x, &mut px);
        a.mul_t_vec(&y, &mut aty);
        let mut rp: f64 = 0.0;
        let mut ax_n: f64 = 0.0;
        let mut s_n: f64 = 0.0;
        for i in 0..m {
            let e = sc.e[i];
            rp = rp.max(((ax[i] + s[i] - b[i]) / e).abs());
            ax_n = ax_n.max((ax[i] / e).abs());
            s_n = s_n.max((s[i] / e).abs());
        }
        let mut rd: f64 = 0.0;
        let mut px_n: f64 = 0.0;
        let mut aty_n: f64 = 0.0;
        for j in 0..n {
            let dc = sc.d[j] * sc.c;
            rd = rd.max(((px[j] + q[j] - aty[j]) / dc).abs());
            px_n = px_n.max((px[j] / dc).abs());
            aty_n = aty_n.max((aty[j] / dc).abs());
        }
        let xpx = dot(&x, &px);
        let pobj = (0.5 * xpx + dot(&q, &x)) / sc.c;
        let dobj = (-0.5 * xpx + dot(&b, &y)) / sc.c;
        res = Residuals {
            primal: rp / (1.0 + ax_n.max(s_n).max(b_norm)),
            dual: rd / (1.0 + px_n.max(aty_n).max(q_norm)),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        };
        if !res.primal.is_finite() || !res.dual.is_finite() || !pobj.is_finite() {
            return Err(ConicError::NonFiniteIterate { iteration: k, primal: res.primal, dual: res.dual });
        }
        if res.max() <= settings.tol {
            status = Status::Optimal;
            break;
        }
        if k == settings.max_iters / 2 {
            half_mark = Some((res.primal, inf_norm(&y)));
        }

        if settings.adapt_every > 0 && k % settings.adapt_every == 0 {
            let est = rho * (res.primal / res.dual.max(1e-300)).sqrt();
            let est = est.clamp(settings.rho_min, settings.rho_max);
            if est > rho * settings.adapt_factor || est < rho / settings.adapt_factor {
                rho = est;
                if !kkt.factor(rho) {
                    return Err(ConicError::Factorization);
                }
            }
        }
    }

    if status != Status::Optimal {
        if let Some((rp_half, y_half)) = half_mark {
            let slow = res.primal > 0.5 * rp_half;
            let diverging = inf_norm(&y) > 10.0 * y_half.max(1e-12);
            if slow && diverging && res.primal > 1e3 * settings.tol {
                status = Status::InfeasibleSuspect;
            }
        }
    }

    let x_out: Vec<f64> = x.iter().zip(&sc.d).map(|(v, d)| v * d).collect();
    let s_out: Vec<f64> = s.iter().zip(&sc.e).map(|(v, e)| v / e).collect();
    let y_out: Vec<f64> = y.iter().zip(&sc.e).map(|(v, e)| -v * e / sc.c).collect();
    let objective = prob.objective(&x_out);
    Ok(ConeSolution { x: x_out, s: s_out, y: y_out, status, residuals: res, iterations, objective, rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::svec_len;

    #[test]
    fn unconstrained_quadratic() {
        let p = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let prob = ConeProblem::new(p, vec![-1.0, -2.0], CsrMatrix::zeros(0, 2), vec![], vec![]).unwrap();
        let sol = solve(&prob, &Settings { tol: 1e-9, ..Settings::default() }).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn two_by_two_lmi() {
        // min t  s.t. [[t,1],[1,t]] psd, written as -A t + s = b
        let a = CsrMatrix::from_triplets(3, 1, vec![(0, 0, -1.0), (2, 0, -1.0)]);
        let b = vec![0.0, std::f64::consts::SQRT_2, 0.0];
        assert_eq!(svec_len(2), 3);
        let prob = ConeProblem::new(CsrMatrix::zeros(1, 1), vec![1.0], a, b, vec![Cone::Psd(2)]).unwrap();
        let sol = solve(&prob, &Settings { tol: 1e-8, ..Settings::default() }).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-5, "{}", sol.x[0]);
    }

    #[test]
    fn nonneg_box() {
        // min (x-3)^2/2  s.t. x <= 1
        let p = CsrMatrix::from_triplets(1, 1, vec![(0, 0, 1.0)]);
        let a = CsrMatrix::from_triplets(1, 1, vec![(0, 0, 1.0)]);
        let prob = ConeProblem::new(p, vec![-3.0], a, vec![1.0], vec![Cone::Nonneg(1)]).unwrap();
        let sol = solve(&prob, &Settings { tol: 1e-9, ..Settings::default() }).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
        assert!((sol.y[0] - 2.0).abs() < 1e-5, "dual {}", sol.y[0]);
    }

    #[test]
    fn identical_inputs_identical_bits() {
        let a = CsrMatrix::from_triplets(3, 1, vec![(0, 0, -1.0), (2, 0, -1.0)]);
        let prob = ConeProblem::new(CsrMatrix::zeros(1, 1), vec![1.0], a, vec![0.0, 1.0, 0.0], vec![Cone::Psd(2)]).unwrap();
        let s1 = solve(&prob, &Settings::default()).unwrap();
        let s2 = solve(&prob, &Settings::default()).unwrap();
        assert_eq!(s1.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), s2.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(s1.iterations, s2.iterations);
    }

    #[test]
    fn dimension_errors() {
        let r = ConeProblem::new(CsrMatrix::zeros(1, 1), vec![1.0], CsrMatrix::zeros(2, 1), vec![0.0, 0.0], vec![Cone::Zero(1)]);
        assert!(matches!(r, Err(ConicError::Dimension(_))));
    }
}
