//! Independent oracles for the cone solver: brute-force active-set
//! enumeration for small QPs, closed forms for SOC problems, eigenvalues for
//! trace-constrained SDPs. Shared with the acceptance suite.

#![allow(dead_code)]

use lqg_conic::{mat_to_svec, solve, svec_index, svec_len, Cone, ConeProblem, CsrMatrix, Settings, Status};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct OracleCase {
    pub kind: &'static str,
    /// max abs deviation of the solver's answer from the oracle
    pub error: f64,
    pub status: Status,
    /// raw bits of x, for determinism checks
    pub bits: Vec<u64>,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps this file free of extra dependencies
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gauss(rng))
}

/// Minimize 1/2 x'Px + q'x s.t. Gx <= h by trying every active set.
pub fn active_set_qp(p: &DMatrix<f64>, q: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let n = p.nrows();
    let m = g.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = act.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-q));
        for (r, &i) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = g[(i, j)];
                kkt[(j, n + r)] = g[(i, j)];
            }
            rhs[n + r] = h[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let lam = sol.rows(n, k);
        let feasible = (g * &x - h).iter().all(|&v| v <= 1e-9);
        let dual_ok = lam.iter().all(|&l| l >= -1e-9);
        if feasible && dual_ok {
            let obj = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, x));
            }
        }
    }
    best.expect("strictly convex feasible QP has a KKT point").1
}

fn dense_to_csr_sym(p: &DMatrix<f64>) -> CsrMatrix {
    CsrMatrix::from_dense(p)
}

fn settings() -> Settings {
    Settings { tol: 1e-9, max_iters: 200_000, ..Settings::default() }
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn qp_case(rng: &mut ChaCha8Rng) -> OracleCase {
    let n = rng.gen_range(2..=5);
    let m = rng.gen_range(1..=8);
    let mfac = rand_mat(rng, n, n);
    let p = mfac.transpose() * &mfac + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| gauss(rng) * 3.0);
    let g = rand_mat(rng, m, n);
    let x0 = DVector::from_fn(n, |_, _| gauss(rng) * 0.3);
    let h = &g * &x0 + DVector::from_fn(m, |_, _| rng.gen_range(0.0..0.5));
    let oracle = active_set_qp(&p, &q, &g, &h);
    let prob = ConeProblem::new(
        dense_to_csr_sym(&p),
        q.as_slice().to_vec(),
        CsrMatrix::from_dense(&g),
        h.as_slice().to_vec(),
        vec![Cone::Nonneg(m)],
    )
    .unwrap();
    let sol = solve(&prob, &settings()).unwrap();
    OracleCase { kind: "qp", error: max_abs_diff(&sol.x, oracle.as_slice()), status: sol.status, bits: bits(&sol.x) }
}

/// Projection onto the SOC by minimizing along the boundary ray with
/// golden-section search (the optimum lies on the ray spanned by c_u).
fn soc_projection_oracle(c: &[f64]) -> Vec<f64> {
    let ct = c[0];
    let nu = c[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu <= ct {
        return c.to_vec();
    }
    // on the boundary x = (r, r * c_u/|c_u|), r >= 0
    let f = |r: f64| (r - ct).powi(2) + (r - nu).powi(2);
    let (mut lo, mut hi) = (0.0, nu + ct.abs() + 1.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let r = 0.5 * (lo + hi);
    let mut out = vec![r];
    out.extend(c[1..].iter().map(|x| r * x / nu));
    out
}

pub fn soc_projection_case(rng: &mut ChaCha8Rng) -> OracleCase {
    let n = rng.gen_range(2..=6);
    let c: Vec<f64> = (0..n).map(|_| gauss(rng) * 2.0).collect();
    let oracle = soc_projection_oracle(&c);
    // min 1/2|x|^2 - c'x  s.t. -x + s = 0, s in SOC
    let p = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect());
    let a = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, -1.0)).collect());
    let q: Vec<f64> = c.iter().map(|v| -v).collect();
    let prob = ConeProblem::new(p, q, a, vec![0.0; n], vec![Cone::Soc(n)]).unwrap();
    let sol = solve(&prob, &settings()).unwrap();
    OracleCase { kind: "soc-projection", error: max_abs_diff(&sol.x, &oracle), status: sol.status, bits: bits(&sol.x) }
}

pub fn soc_linear_case(rng: &mut ChaCha8Rng) -> OracleCase {
    // min a'x  s.t. |x| <= r   =>   x = -r a/|a|
    let n = rng.gen_range(1..=5);
    let a_vec: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let r = rng.gen_range(0.5..2.0);
    let na = a_vec.iter().map(|x| x * x).sum::<f64>().sqrt();
    let oracle: Vec<f64> = a_vec.iter().map(|x| -r * x / na).collect();
    // rows: s0 = r, s_{1..} = x
    let a = CsrMatrix::from_triplets(n + 1, n, (0..n).map(|i| (i + 1, i, -1.0)).collect());
    let mut b = vec![0.0; n + 1];
    b[0] = r;
    let prob = ConeProblem::new(CsrMatrix::zeros(n, n), a_vec, a, b, vec![Cone::Soc(n + 1)]).unwrap();
    let sol = solve(&prob, &settings()).unwrap();
    OracleCase { kind: "soc-linear", error: max_abs_diff(&sol.x, &oracle), status: sol.status, bits: bits(&sol.x) }
}

pub fn sdp_min_eig_case(rng: &mut ChaCha8Rng) -> OracleCase {
    // min <C, X>  s.t. tr X = 1, X psd   =>   lambda_min(C)
    let side = rng.gen_range(2..=4);
    let r = rand_mat(rng, side, side);
    let c = 0.5 * (&r + r.transpose());
    let oracle = SymmetricEigen::new(c.clone()).eigenvalues.min();
    let nv = svec_len(side);
    let q = mat_to_svec(&c);
    let mut t = vec![];
    for i in 0..side {
        t.push((0, svec_index(i, i, side), 1.0));
    }
    for k in 0..nv {
        t.push((1 + k, k, -1.0));
    }
    let a = CsrMatrix::from_triplets(1 + nv, nv, t);
    let mut b = vec![0.0; 1 + nv];
    b[0] = 1.0;
    let prob = ConeProblem::new(CsrMatrix::zeros(nv, nv), q, a, b, vec![Cone::Zero(1), Cone::Psd(side)]).unwrap();
    let sol = solve(&prob, &settings()).unwrap();
    OracleCase { kind: "sdp-min-eig", error: (sol.objective - oracle).abs(), status: sol.status, bits: bits(&sol.x) }
}

pub fn sdp_lmi_case(rng: &mut ChaCha8Rng) -> OracleCase {
    // min t  s.t. [[t, a],[a, t]] psd   =>   t = |a|
    let av: f64 = gauss(rng) * 2.0;
    let a = CsrMatrix::from_triplets(3, 1, vec![(0, 0, -1.0), (2, 0, -1.0)]);
    let b = vec![0.0, std::f64::consts::SQRT_2 * av, 0.0];
    let prob = ConeProblem::new(CsrMatrix::zeros(1, 1), vec![1.0], a, b, vec![Cone::Psd(2)]).unwrap();
    let sol = solve(&prob, &settings()).unwrap();
    OracleCase { kind: "sdp-lmi", error: (sol.x[0] - av.abs()).abs(), status: sol.status, bits: bits(&sol.x) }
}

/// 100 problems: 40 QPs, 15 + 15 SOCPs, 20 + 10 SDPs.
pub fn oracle_suite(seed: u64) -> Vec<OracleCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![];
    for _ in 0..40 {
        out.push(qp_case(&mut rng));
    }
    for _ in 0..15 {
        out.push(soc_projection_case(&mut rng));
    }
    for _ in 0..15 {
        out.push(soc_linear_case(&mut rng));
    }
    for _ in 0..20 {
        out.push(sdp_min_eig_case(&mut rng));
    }
    for _ in 0..10 {
        out.push(sdp_lmi_case(&mut rng));
    }
    out
}
