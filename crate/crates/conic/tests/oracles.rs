mod common {
    pub mod oracles;
}

use common::oracles::*;
use lqg_conic::{project_psd, project_soc, solve, Cone, ConeProblem, CsrMatrix, Settings, Status};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_problems_match_oracles() {
    let cases = oracle_suite(7);
    for (i, c) in cases.iter().enumerate() {
        assert_eq!(c.status, Status::Optimal, "case {i} ({})", c.kind);
        assert!(c.error <= 1e-5, "case {i} ({}) off by {:e}", c.kind, c.error);
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = oracle_suite(11);
    let b = oracle_suite(11);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.bits, y.bits);
    }
}

#[test]
fn cost_scaling_barely_moves_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let base = qp_problem(&mut rng);
        let mut scaled = base.clone();
        scaled.p.values.iter_mut().for_each(|v| *v *= 1e3);
        scaled.q.iter_mut().for_each(|v| *v *= 1e3);
        let s = Settings { tol: 1e-9, ..Settings::default() };
        let x1 = solve(&base, &s).unwrap().x;
        let x2 = solve(&scaled, &s).unwrap().x;
        let nrm = x1.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff / nrm <= 1e-4, "relative change {}", diff / nrm);
    }
}

fn qp_problem(rng: &mut ChaCha8Rng) -> ConeProblem {
    use rand::Rng;
    let n = 4;
    let m = 6;
    let f = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = f.transpose() * &f + DMatrix::identity(n, n) * 0.2;
    let g = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let h: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    ConeProblem::new(CsrMatrix::from_dense(&p), q, CsrMatrix::from_dense(&g), h, vec![Cone::Nonneg(m)]).unwrap()
}

#[test]
fn returned_slack_is_in_cone_and_objective_dominates_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = Settings::default();
    for _ in 0..10 {
        let prob = qp_problem(&mut rng);
        let sol = solve(&prob, &s).unwrap();
        let d = Cone::Nonneg(prob.num_rows()).distance(&sol.s);
        assert!(d <= s.tol);
        // x = 0 is feasible since h > 0
        let obj0 = prob.objective(&vec![0.0; prob.num_vars()]);
        assert!(sol.objective <= obj0 + s.tol * (1.0 + obj0.abs()));
        // the brute-force optimum is feasible too; ADMM can only undercut it by the tolerance
        let pd = prob.p.to_dense();
        let gd = prob.a.to_dense();
        let x = active_set_qp(&pd, &nalgebra::DVector::from_vec(prob.q.clone()), &gd, &nalgebra::DVector::from_vec(prob.b.clone()));
        let best = prob.objective(x.as_slice());
        assert!(sol.objective >= best - 10.0 * s.tol * (1.0 + best.abs()));
    }
}

fn psd2_closed_form(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
    let mut out = DMatrix::zeros(2, 2);
    for lam in [mid + rad, mid - rad] {
        if lam <= 0.0 {
            continue;
        }
        // eigenvector of [[a,b],[b,c]] for lam
        let (v0, v1) = if b.abs() > 1e-300 {
            (b, lam - a)
        } else if (lam - a).abs() <= (lam - c).abs() {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let n2 = v0 * v0 + v1 * v1;
        out[(0, 0)] += lam * v0 * v0 / n2;
        out[(0, 1)] += lam * v0 * v1 / n2;
        out[(1, 0)] += lam * v0 * v1 / n2;
        out[(1, 1)] += lam * v1 * v1 / n2;
    }
    out
}

proptest! {
    #[test]
    fn psd_projection_matches_two_by_two_formula(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let p = project_psd(&m);
        let o = psd2_closed_form(a, b, c);
        prop_assert!((p - o).abs().max() <= 1e-9);
    }

    #[test]
    fn psd_projection_is_idempotent_and_psd(v in proptest::collection::vec(-3.0..3.0f64, 16)) {
        let m = DMatrix::from_row_slice(4, 4, &v);
        let p = project_psd(&m);
        let min_eig = nalgebra::SymmetricEigen::new(p.clone()).eigenvalues.min();
        prop_assert!(min_eig >= -1e-10);
        prop_assert!((project_psd(&p) - &p).abs().max() <= 1e-10);
    }

    #[test]
    fn soc_projection_lands_in_cone_and_is_idempotent(v in proptest::collection::vec(-3.0..3.0f64, 1..6)) {
        let p = project_soc(&v);
        let nu = p[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(nu <= p[0] + 1e-12);
        let pp = project_soc(&p);
        for (x, y) in p.iter().zip(&pp) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}
