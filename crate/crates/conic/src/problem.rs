use crate::cones::Cone;
use crate::sparse::CsrMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `min 1/2 x'Px + q'x  s.t.  Ax + s = b,  s in K`.
///
/// `P` must be stored with both triangles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeProblem {
    pub p: CsrMatrix,
    pub q: Vec<f64>,
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("P is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("non-finite problem data")]
    NonFiniteData,
    #[error("x-update matrix is not positive definite (P not PSD?)")]
    Factorization,
    #[error("non-finite iterate at iteration {iteration} (primal {primal:e}, dual {dual:e})")]
    NonFiniteIterate { iteration: usize, primal: f64, dual: f64 },
}

impl ConeProblem {
    pub fn new(p: CsrMatrix, q: Vec<f64>, a: CsrMatrix, b: Vec<f64>, cones: Vec<Cone>) -> Result<Self, ConicError> {
        let prob = ConeProblem { p, q, a, b, cones };
        prob.validate()?;
        Ok(prob)
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.q.len();
        let m = self.b.len();
        if self.p.nrows != n || self.p.ncols != n {
            return Err(ConicError::Dimension(format!("P is {}x{}, expected {n}x{n}", self.p.nrows, self.p.ncols)));
        }
        if self.a.nrows != m || self.a.ncols != n {
            return Err(ConicError::Dimension(format!("A is {}x{}, expected {m}x{n}", self.a.nrows, self.a.ncols)));
        }
        let total: usize = self.cones.iter().map(|c| c.dim()).sum();
        if total != m {
            return Err(ConicError::Dimension(format!("cones cover {total} rows, A has {m}")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.q) || !finite(&self.b) || !finite(&self.p.values) || !finite(&self.a.values) {
            return Err(ConicError::NonFiniteData);
        }
        let pd = self.p.to_dense_if_small();
        if let Some(pd) = pd {
            let asym = (&pd - pd.transpose()).abs().max();
            let scale = pd.abs().max().max(1.0);
            if asym > 1e-10 * scale {
                return Err(ConicError::Asymmetric(asym));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.p.mul_vec(x, &mut px);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }

    /// JSON debug dump.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serializes")
    }
}

impl CsrMatrix {
    fn to_dense_if_small(&self) -> Option<nalgebra::DMatrix<f64>> {
        (self.nrows <= 2000).then(|| self.to_dense())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Settings {
    /// Tolerance on the normalized primal, dual and gap residuals.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial penalty.
    pub rho: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Iterations between penalty updates.
    pub adapt_every: usize,
    /// Penalty is only changed when the balancing estimate moves by this factor.
    pub adapt_factor: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub relaxation: f64,
    /// Ruiz equilibration passes (0 disables scaling).
    pub scaling_iters: usize,
    /// Penalty multiplier on equality rows.
    pub eq_weight: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol: 1e-6,
            max_iters: 50_000,
            rho: 1.0,
            rho_min: 1e-4,
            rho_max: 1e4,
            adapt_every: 25,
            adapt_factor: 2.0,
            sigma: 1e-6,
            relaxation: 1.6,
            scaling_iters: 10,
            eq_weight: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    MaxIters,
    InfeasibleSuspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Primal `x`, slack `s` and dual `y` (with `y` in the dual cone).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeSolution {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub status: Status,
    pub residuals: Residuals,
    pub iterations: usize,
    pub objective: f64,
    pub rho: f64,
}

/// Initial point injection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl From<&ConeSolution> for WarmStart {
    fn from(s: &ConeSolution) -> Self {
        WarmStart { x: s.x.clone(), s: s.s.clone(), y: s.y.clone() }
    }
}
