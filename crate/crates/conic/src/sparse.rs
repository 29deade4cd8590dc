use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    /// Build from `(row, col, value)` triplets. Duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsrMatrix { nrows, ncols, indptr, indices, values };
        m.drop_zeros();
        m
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        let mut t = vec![];
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    t.push((i, j, d[(i, j)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_range(r) {
                d[(r, self.indices[k])] += self.values[k];
            }
        }
        d
    }

    fn drop_zeros(&mut self) {
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = vec![];
        let mut values = vec![];
        for r in 0..self.nrows {
            for k in self.row_range(r) {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    #[inline]
    pub fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        self.indptr[r]..self.indptr[r + 1]
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out = self * x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for k in self.row_range(r) {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o = acc;
        }
    }

    /// `out = self^T * y`
    pub fn mul_t_vec(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate().take(self.nrows) {
            if yr == 0.0 {
                continue;
            }
            for k in self.row_range(r) {
                out[self.indices[k]] += self.values[k] * yr;
            }
        }
    }

    /// Scale rows by `e` and columns by `d`: `diag(e) * self * diag(d)`.
    pub fn scale(&mut self, e: &[f64], d: &[f64]) {
        for r in 0..self.nrows {
            for k in self.row_range(r) {
                self.values[k] *= e[r] * d[self.indices[k]];
            }
        }
    }

    pub fn row_inf_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row_range(r).map(|k| self.values[k].abs()).fold(0.0, f64::max))
            .collect()
    }

    pub fn col_inf_norms(&self) -> Vec<f64> {
        let mut n = vec![0.0f64; self.ncols];
        for (k, &c) in self.indices.iter().enumerate() {
            n[c] = n[c].max(self.values[k].abs());
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 3.0), (0, 1, 0.0)]);
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(1, 2)], 4.0);
        assert_eq!(d[(0, 0)], 2.0);
    }

    #[test]
    fn products_match_dense() {
        let d = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -2.0, 0.5, 3.0, 0.0]);
        let m = CsrMatrix::from_dense(&d);
        let x = [1.0, 2.0, 3.0];
        let mut out = [0.0; 2];
        m.mul_vec(&x, &mut out);
        assert_eq!(out, [-5.0, 6.5]);
        let mut back = [0.0; 3];
        m.mul_t_vec(&[1.0, -1.0], &mut back);
        assert_eq!(back, [0.5, -3.0, -2.0]);
    }
}
