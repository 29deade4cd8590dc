//! Cone definitions and Euclidean projections.
//!
//! PSD blocks are stored in `svec` form: the lower triangle in column-major
//! order, with off-diagonal entries multiplied by sqrt(2) so that the
//! Euclidean inner product on vectors matches the trace inner product.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// One block of the product cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    /// `{0}^n`
    Zero(usize),
    /// `R_+^n`
    Nonneg(usize),
    /// `{(t, u) : ||u|| <= t}` of total dimension `n`, `t` first.
    Soc(usize),
    /// Symmetric PSD matrices of the given side, in svec form.
    Psd(usize),
}

impl Cone {
    /// Number of rows this block occupies.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonneg(n) | Cone::Soc(n) => n,
            Cone::Psd(s) => svec_len(s),
        }
    }

    /// Project `v` onto the cone in place.
    pub fn project(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        match *self {
            Cone::Zero(_) => v.iter_mut().for_each(|x| *x = 0.0),
            Cone::Nonneg(_) => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::Soc(_) => project_soc_in_place(v),
            Cone::Psd(s) => {
                let m = svec_to_mat(v, s);
                let p = project_psd(&m);
                mat_to_svec_into(&p, v);
            }
        }
    }

    /// Euclidean distance of `v` from the cone.
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut p = v.to_vec();
        self.project(&mut p);
        v.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Position of entry `(i, j)` (either triangle) inside the svec of a `side`-sized matrix.
pub fn svec_index(i: usize, j: usize, side: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    c * side - c * c.saturating_sub(1) / 2 + (r - c)
}

pub fn svec_to_mat(v: &[f64], side: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(side, side);
    let mut k = 0;
    for j in 0..side {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..side {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

pub fn mat_to_svec(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = vec![0.0; svec_len(m.nrows())];
    mat_to_svec_into(m, &mut v);
    v
}

fn mat_to_svec_into(m: &DMatrix<f64>, v: &mut [f64]) {
    let side = m.nrows();
    let mut k = 0;
    for j in 0..side {
        v[k] = m[(j, j)];
        k += 1;
        for i in j + 1..side {
            v[k] = 0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2;
            k += 1;
        }
    }
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped).
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (m + m.transpose());
    let n = sym.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, sym[(0, 0)].max(0.0));
    }
    let eig = SymmetricEigen::new(sym.clone());
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if negatives == 0 {
        return sym;
    }
    // Rank updates over whichever side of the spectrum is smaller.
    let (mut out, keep_negative) = if 2 * negatives < n {
        (sym, true)
    } else {
        (DMatrix::zeros(n, n), false)
    };
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if keep_negative && l < 0.0 {
            out.ger(-l, &v, &v, 1.0);
        } else if !keep_negative && l > 0.0 {
            out.ger(l, &v, &v, 1.0);
        }
    }
    out
}

/// Projection onto the second-order cone, `v = (t, u)`.
pub fn project_soc(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_soc_in_place(&mut out);
    out
}

fn project_soc_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let t = v[0];
    let nu = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu <= t {
        return;
    }
    if nu <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let a = 0.5 * (t + nu);
    v[0] = a;
    let f = a / nu;
    v[1..].iter_mut().for_each(|x| *x *= f);
}
