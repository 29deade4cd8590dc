//! Factorization of the ADMM x-update matrix `P + sigma I + rho A^T W A`.
//!
//! The column graph of that matrix usually splits into many small connected
//! components (one per equality group plus the block coupling the cost), so
//! each component is factored densely on its own.

use crate::sparse::CsrMatrix;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

struct Component {
    cols: Vec<usize>,
    base: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

pub(crate) struct KktSolver {
    comps: Vec<Component>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

impl KktSolver {
    /// `w` holds per-row weights of `A^T W A`.
    pub fn new(p: &CsrMatrix, a: &CsrMatrix, w: &[f64], sigma: f64) -> Self {
        let n = p.ncols;
        let mut parent: Vec<usize> = (0..n).collect();
        for r in 0..p.nrows {
            for k in p.row_range(r) {
                union(&mut parent, r, p.indices[k]);
            }
        }
        for r in 0..a.nrows {
            let range = a.row_range(r);
            if range.len() > 1 {
                let first = a.indices[range.start];
                for k in range {
                    union(&mut parent, first, a.indices[k]);
                }
            }
        }

        let mut comp_of_root = vec![usize::MAX; n];
        let mut local = vec![0usize; n];
        let mut comp_of = vec![0usize; n];
        let mut cols: Vec<Vec<usize>> = vec![];
        for j in 0..n {
            let r = find(&mut parent, j);
            if comp_of_root[r] == usize::MAX {
                comp_of_root[r] = cols.len();
                cols.push(vec![]);
            }
            let c = comp_of_root[r];
            comp_of[j] = c;
            local[j] = cols[c].len();
            cols[c].push(j);
        }

        let mut comps: Vec<Component> = cols
            .into_iter()
            .map(|cols| {
                let k = cols.len();
                let mut base = DMatrix::zeros(k, k);
                for i in 0..k {
                    base[(i, i)] = sigma;
                }
                Component { cols, base, gram: DMatrix::zeros(k, k), chol: None }
            })
            .collect();

        for r in 0..p.nrows {
            let c = comp_of[r];
            for k in p.row_range(r) {
                let j = p.indices[k];
                comps[c].base[(local[r], local[j])] += p.values[k];
            }
        }
        for r in 0..a.nrows {
            let range = a.row_range(r);
            if range.is_empty() {
                continue;
            }
            let c = comp_of[a.indices[range.start]];
            for k1 in range.clone() {
                let i = local[a.indices[k1]];
                let vi = w[r] * a.values[k1];
                for k2 in range.clone() {
                    let j = local[a.indices[k2]];
                    comps[c].gram[(i, j)] += vi * a.values[k2];
                }
            }
        }
        KktSolver { comps }
    }

    /// Refactor for a new penalty `rho`. Returns false if some block is not
    /// positive definite.
    pub fn factor(&mut self, rho: f64) -> bool {
        let mut ok = true;
        for c in &mut self.comps {
            let m = &c.base + &c.gram * rho;
            c.chol = Cholesky::new(m);
            ok &= c.chol.is_some();
        }
        ok
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        for c in &self.comps {
            let chol = c.chol.as_ref().expect("factor() must succeed before solve");
            if c.cols.len() == 1 {
                let j = c.cols[0];
                rhs[j] /= chol.l_dirty()[(0, 0)].powi(2);
                continue;
            }
            let mut b = DVector::from_iterator(c.cols.len(), c.cols.iter().map(|&j| rhs[j]));
            chol.solve_mut(&mut b);
            for (k, &j) in c.cols.iter().enumerate() {
                rhs[j] = b[k];
            }
        }
    }
}
