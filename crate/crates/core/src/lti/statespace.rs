use super::fir::FirTm;
use super::linalg::{phi_margin, spectral_norm, spectral_radius};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Strictly proper plant `x+ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SsRepr", into = "SsRepr")]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SsRepr {
    #[serde(rename = "A", with = "crate::serde_mat")]
    a: DMatrix<f64>,
    #[serde(rename = "B", with = "crate::serde_mat")]
    b: DMatrix<f64>,
    #[serde(rename = "C", with = "crate::serde_mat")]
    c: DMatrix<f64>,
}

impl TryFrom<SsRepr> for StateSpace {
    type Error = Error;
    fn try_from(r: SsRepr) -> Result<Self> {
        StateSpace::new(r.a, r.b, r.c)
    }
}

impl From<StateSpace> for SsRepr {
    fn from(s: StateSpace) -> Self {
        SsRepr { a: s.a, b: s.b, c: s.c }
    }
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state-space matrices".into()));
        }
        Ok(StateSpace { a, b, c })
    }

    /// Like `new`, but also checks `rho(A) < 1`.
    pub fn new_stable(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let s = Self::new(a, b, c)?;
        let rho = s.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::Unstable(rho));
        }
        Ok(s)
    }

    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        let e = |v| DMatrix::from_element(1, 1, v);
        StateSpace { a: e(a), b: e(b), c: e(c) }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    pub fn require_stable(&self) -> Result<f64> {
        let rho = self.spectral_radius()?;
        if rho >= 1.0 {
            Err(Error::Unstable(rho))
        } else {
            Ok(rho)
        }
    }

    /// `C (e^{jw} I - A)^{-1} B`.
    pub fn freq_response(&self, w: f64) -> DMatrix<Complex64> {
        freq_response(&self.a, &self.b, &self.c, None, w)
    }

    /// `Phi(A) ||C|| ||B||`, the prefactor of the geometric tail bound.
    pub fn tail_prefactor(&self) -> Result<f64> {
        Ok(phi_margin(&self.a, None)? * spectral_norm(&self.c) * spectral_norm(&self.b))
    }
}

/// `C (e^{jw} I - A)^{-1} B + D` for a general realization.
pub fn freq_response(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: Option<&DMatrix<f64>>, w: f64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let cplx = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let mut out = match d {
        Some(d) => cplx(d),
        None => DMatrix::zeros(c.nrows(), b.ncols()),
    };
    if n == 0 {
        return out;
    }
    let z = Complex64::from_polar(1.0, w);
    let mut m = -cplx(a);
    for i in 0..n {
        m[(i, i)] += z;
    }
    let x = m.lu().solve(&cplx(b)).unwrap_or_else(|| DMatrix::from_element(n, b.ncols(), Complex64::new(f64::INFINITY, 0.0)));
    out += cplx(c) * x;
    out
}

/// `[0, CB, CAB, ..., C A^{L-2} B]`, flagged strictly proper.
pub fn markov_parameters(ss: &StateSpace, len: usize) -> Result<FirTm> {
    if len == 0 {
        return Err(Error::Validation("Markov horizon must be positive".into()));
    }
    let mut coeffs = vec![DMatrix::zeros(ss.p(), ss.m())];
    let mut ab = ss.b.clone();
    for _ in 1..len {
        coeffs.push(&ss.c * &ab);
        ab = &ss.a * ab;
    }
    FirTm::new(coeffs)?.into_strictly_proper()
}

/// Covariances and cost weights of the LQG problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgWeights {
    #[serde(rename = "Q", with = "crate::serde_mat")]
    pub q: DMatrix<f64>,
    #[serde(rename = "R", with = "crate::serde_mat")]
    pub r: DMatrix<f64>,
    pub sigma_w: f64,
    pub sigma_v: f64,
    pub sigma_u: f64,
}

impl LqgWeights {
    /// `Q = I_p`, `R = I_m`, unit noise and excitation levels.
    pub fn identity(m: usize, p: usize) -> Self {
        LqgWeights { q: DMatrix::identity(p, p), r: DMatrix::identity(m, m), sigma_w: 1.0, sigma_v: 1.0, sigma_u: 1.0 }
    }

    pub fn with_sigmas(mut self, sigma_w: f64, sigma_v: f64, sigma_u: f64) -> Self {
        self.sigma_w = sigma_w;
        self.sigma_v = sigma_v;
        self.sigma_u = sigma_u;
        self
    }

    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        if self.q.shape() != (p, p) || self.r.shape() != (m, m) {
            return Err(Error::Dimension(format!("weights Q {:?}, R {:?} for m={m}, p={p}", self.q.shape(), self.r.shape())));
        }
        let sym = |x: &DMatrix<f64>| (x - x.transpose()).abs().max() <= 1e-12 * x.abs().max().max(1.0);
        if !sym(&self.q) || !sym(&self.r) {
            return Err(Error::Validation("Q and R must be symmetric".into()));
        }
        let min_eig = |x: &DMatrix<f64>| if x.is_empty() { 0.0 } else { x.clone().symmetric_eigen().eigenvalues.min() };
        if min_eig(&self.q) < -1e-12 {
            return Err(Error::Validation("Q must be PSD".into()));
        }
        if m > 0 && min_eig(&self.r) <= 0.0 {
            return Err(Error::Validation("R must be positive definite".into()));
        }
        if !(self.sigma_w >= 0.0 && self.sigma_v >= 0.0 && self.sigma_u >= 0.0) {
            return Err(Error::Validation("noise levels must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_examples() {
        let g = markov_parameters(&StateSpace::scalar(0.0, 1.0, 1.0), 4).unwrap();
        let taps: Vec<f64> = g.coeffs().iter().map(|c| c[(0, 0)]).collect();
        assert_eq!(taps, vec![0.0, 1.0, 0.0, 0.0]);
        let g = markov_parameters(&StateSpace::scalar(0.5, 1.0, 1.0), 4).unwrap();
        let taps: Vec<f64> = g.coeffs().iter().map(|c| c[(0, 0)]).collect();
        assert_eq!(taps, vec![0.0, 1.0, 0.5, 0.25]);
        assert!(g.is_strictly_proper());
    }

    #[test]
    fn json_schema() {
        let s = StateSpace::scalar(0.5, 1.0, 2.0);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"A":[[0.5]],"B":[[1.0]],"C":[[2.0]]}"#);
        assert_eq!(serde_json::from_str::<StateSpace>(&j).unwrap(), s);
        assert!(serde_json::from_str::<StateSpace>(r#"{"A":[[0.5]],"B":[[1.0],[1.0]],"C":[[2.0]]}"#).is_err());
    }

    #[test]
    fn first_order_response() {
        // 1/(z - 0.5) peaks at w = 0 with value 2
        let s = StateSpace::scalar(0.5, 1.0, 1.0);
        assert!((s.freq_response(0.0)[(0, 0)].norm() - 2.0).abs() < 1e-14);
    }
}
