use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// FIR transfer matrix `G(z) = sum_k G_k z^{-k}` with `p x m` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FirRepr", into = "FirRepr")]
pub struct FirTm {
    coeffs: Vec<DMatrix<f64>>,
    strictly_proper: bool,
}

#[derive(Serialize, Deserialize)]
struct FirRepr {
    #[serde(with = "crate::serde_mat::vec")]
    coeffs: Vec<DMatrix<f64>>,
    strictly_proper: bool,
}

impl TryFrom<FirRepr> for FirTm {
    type Error = Error;
    fn try_from(r: FirRepr) -> Result<Self> {
        let f = FirTm::new(r.coeffs)?;
        if r.strictly_proper {
            f.into_strictly_proper()
        } else {
            Ok(f)
        }
    }
}

impl From<FirTm> for FirRepr {
    fn from(f: FirTm) -> Self {
        FirRepr { coeffs: f.coeffs, strictly_proper: f.strictly_proper }
    }
}

impl FirTm {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Validation("FIR needs at least one coefficient".into()));
        };
        let (p, m) = first.shape();
        if coeffs.iter().any(|c| c.shape() != (p, m)) {
            return Err(Error::Dimension("FIR coefficients differ in shape".into()));
        }
        if coeffs.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("FIR coefficients".into()));
        }
        Ok(FirTm { coeffs, strictly_proper: false })
    }

    /// Flag as strictly proper; fails unless `G_0` is exactly zero.
    pub fn into_strictly_proper(mut self) -> Result<Self> {
        if self.coeffs[0].iter().any(|&v| v != 0.0) {
            return Err(Error::Validation("strictly proper FIR must have G_0 = 0".into()));
        }
        self.strictly_proper = true;
        Ok(self)
    }

    pub fn zeros(p: usize, m: usize, len: usize) -> Self {
        FirTm { coeffs: vec![DMatrix::zeros(p, m); len.max(1)], strictly_proper: false }
    }

    /// Constant identity.
    pub fn identity(n: usize) -> Self {
        FirTm { coeffs: vec![DMatrix::identity(n, n)], strictly_proper: false }
    }

    /// Scalar FIR from its taps.
    pub fn scalar(taps: &[f64]) -> Self {
        FirTm::new(taps.iter().map(|&t| DMatrix::from_element(1, 1, t)).collect()).expect("nonempty scalar taps")
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<DMatrix<f64>> {
        self.coeffs
    }

    pub fn horizon(&self) -> usize {
        self.coeffs.len()
    }

    pub fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.strictly_proper
    }

    /// Coefficient `k`, zero beyond the horizon.
    pub fn coeff(&self, k: usize) -> DMatrix<f64> {
        self.coeffs.get(k).cloned().unwrap_or_else(|| DMatrix::zeros(self.rows(), self.cols()))
    }

    fn combine(&self, other: &FirTm, f: impl Fn(f64, f64) -> f64) -> Result<FirTm> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{} FIR",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        let len = self.horizon().max(other.horizon());
        let z = DMatrix::zeros(self.rows(), self.cols());
        let coeffs = (0..len)
            .map(|k| {
                let a = self.coeffs.get(k).unwrap_or(&z);
                let b = other.coeffs.get(k).unwrap_or(&z);
                a.zip_map(b, &f)
            })
            .collect();
        Ok(FirTm { coeffs, strictly_proper: self.strictly_proper && other.strictly_proper })
    }

    pub fn add(&self, other: &FirTm) -> Result<FirTm> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FirTm) -> Result<FirTm> {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> FirTm {
        FirTm { coeffs: self.coeffs.iter().map(|c| c * s).collect(), strictly_proper: self.strictly_proper }
    }

    pub fn transpose(&self) -> FirTm {
        FirTm { coeffs: self.coeffs.iter().map(|c| c.transpose()).collect(), strictly_proper: self.strictly_proper }
    }

    /// Keep the first `len` coefficients (zero padded if longer).
    pub fn truncate(&self, len: usize) -> FirTm {
        let coeffs = (0..len.max(1)).map(|k| self.coeff(k)).collect();
        FirTm { coeffs, strictly_proper: self.strictly_proper }
    }

    /// Drop trailing all-zero coefficients (keeps at least one).
    pub fn trim(&self) -> FirTm {
        let mut len = self.horizon();
        while len > 1 && self.coeffs[len - 1].iter().all(|&v| v == 0.0) {
            len -= 1;
        }
        self.truncate(len)
    }

    /// `G(e^{j w})`.
    pub fn freq_response(&self, w: f64) -> DMatrix<Complex64> {
        let zinv = Complex64::from_polar(1.0, -w);
        // Horner in z^{-1}
        let mut acc = DMatrix::<Complex64>::zeros(self.rows(), self.cols());
        for c in self.coeffs.iter().rev() {
            acc *= zinv;
            acc += c.map(|v| Complex64::new(v, 0.0));
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs().max()).fold(0.0, f64::max)
    }

    /// Block row `[G_0, G_1, ..., G_{L-1}]`.
    pub fn block_row(&self) -> DMatrix<f64> {
        let (p, m) = (self.rows(), self.cols());
        let mut out = DMatrix::zeros(p, m * self.horizon());
        for (k, c) in self.coeffs.iter().enumerate() {
            out.view_mut((0, k * m), (p, m)).copy_from(c);
        }
        out
    }
}

/// `H_k = sum_{i+j=k} F_i G_j`, horizon `L_F + L_G - 1`.
pub fn fir_convolve(f: &FirTm, g: &FirTm) -> Result<FirTm> {
    if f.cols() != g.rows() {
        return Err(Error::Dimension(format!("cannot multiply {}x{} by {}x{} FIR", f.rows(), f.cols(), g.rows(), g.cols())));
    }
    let len = f.horizon() + g.horizon() - 1;
    let mut coeffs = vec![DMatrix::zeros(f.rows(), g.cols()); len];
    for (i, fi) in f.coeffs.iter().enumerate() {
        if fi.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (j, gj) in g.coeffs.iter().enumerate() {
            coeffs[i + j].gemm(1.0, fi, gj, 1.0);
        }
    }
    Ok(FirTm { coeffs, strictly_proper: f.strictly_proper || g.strictly_proper })
}
