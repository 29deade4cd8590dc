//! Oracles and generators shared by the integration tests.

#![allow(dead_code)]

use lqg_core::lti::FirTm;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

pub fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    })
}

pub fn random_fir(rng: &mut ChaCha8Rng, p: usize, m: usize, len: usize) -> FirTm {
    FirTm::new((0..len).map(|_| gauss_mat(rng, p, m)).collect()).unwrap()
}

/// Random FIR with `G_0 = 0`.
pub fn random_strict_fir(rng: &mut ChaCha8Rng, p: usize, m: usize, len: usize) -> FirTm {
    let mut c: Vec<DMatrix<f64>> = (0..len).map(|_| gauss_mat(rng, p, m)).collect();
    c[0].fill(0.0);
    FirTm::new(c).unwrap().into_strictly_proper().unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng, max_pm: usize, max_len: usize) -> (usize, usize, usize) {
    (rng.gen_range(1..=max_pm), rng.gen_range(1..=max_pm), rng.gen_range(1..=max_len))
}

/// `sqrt((1/2pi) int ||G(e^jw)||_F^2 dw)` by the `n`-point rectangle rule,
/// exact for trigonometric polynomials of degree below `n`.
pub fn h2_frequency_integral(g: &FirTm, n: usize) -> f64 {
    let s: f64 = (0..n).map(|k| g.freq_response(2.0 * PI * k as f64 / n as f64).norm_squared()).sum();
    (s / n as f64).sqrt()
}

/// Max singular value of `G(e^jw)` over an `n`-point grid.
pub fn grid_sup(g: &FirTm, n: usize) -> f64 {
    (0..n)
        .map(|k| {
            let h = g.freq_response(PI * k as f64 / (n - 1) as f64);
            h.singular_values().max()
        })
        .fold(0.0, f64::max)
}
