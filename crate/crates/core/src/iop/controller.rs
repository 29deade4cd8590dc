use crate::error::{Error, Result};
use crate::lti::{Controller, FirTm};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// `K = U (I + G U)^{-1}` run as `e = y - G u`, `u = U e`, with ring
/// buffers of past `e` and `u`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirController {
    pub u: FirTm,
    pub g_hat: FirTm,
    #[serde(skip)]
    past_e: VecDeque<DVector<f64>>,
    #[serde(skip)]
    past_u: VecDeque<DVector<f64>>,
}

/// Fails with ill-posed feedthrough unless `G_0 = 0`.
pub fn realize_controller(u: &FirTm, g_hat: &FirTm) -> Result<FirController> {
    if g_hat.coeff(0).iter().any(|&v| v != 0.0) {
        return Err(Error::IllPosedFeedthrough);
    }
    if u.rows() != g_hat.cols() || u.cols() != g_hat.rows() {
        return Err(Error::Dimension(format!("U is {}x{}, plant model is {}x{}", u.rows(), u.cols(), g_hat.rows(), g_hat.cols())));
    }
    Ok(FirController { u: u.clone(), g_hat: g_hat.clone(), past_e: VecDeque::new(), past_u: VecDeque::new() })
}

impl FirController {
    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn p(&self) -> usize {
        self.u.cols()
    }
}

impl Controller for FirController {
    fn step(&mut self, y: &DVector<f64>) -> DVector<f64> {
        // past_u[0] is u_{t-1}
        let mut e = y.clone();
        for (k, uk) in self.past_u.iter().enumerate() {
            e -= self.g_hat.coeff(k + 1) * uk;
        }
        self.past_e.push_front(e);
        self.past_e.truncate(self.u.horizon());
        let mut out = DVector::zeros(self.m());
        for (k, ek) in self.past_e.iter().enumerate() {
            out += &self.u.coeffs()[k] * ek;
        }
        self.past_u.push_front(out.clone());
        self.past_u.truncate(self.g_hat.horizon().saturating_sub(1));
        out
    }

    fn reset(&mut self) {
        self.past_e.clear();
        self.past_u.clear();
    }
}
