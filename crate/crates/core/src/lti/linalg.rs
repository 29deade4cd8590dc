use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Largest eigenvalue modulus from a full eigenvalue decomposition.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("spectral radius of {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    match a.nrows() {
        0 => return Ok(0.0),
        1 => return Ok(a[(0, 0)].abs()),
        _ => {}
    }
    // nalgebra's Schur iteration stalls on nilpotent blocks (FIR shift registers)
    let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let eig = m.eigenvalues::<faer::complex_native::c64>();
    let rho = eig.iter().map(|z| z.abs()).fold(0.0, f64::max);
    if rho.is_finite() { Ok(rho) } else { Err(Error::Eigen) }
}

/// Symmetric PSD square root (negative eigenvalues from rounding are clamped).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Lower estimate of `Phi(A) = sup_tau ||A^tau|| / rho(A)^tau` over `0..=tau_max`.
///
/// `tau_max = None` uses `10 n / (1 - rho)` capped at 1e5. Returns 1 when
/// `rho(A) = 0`.
pub fn phi_margin(a: &DMatrix<f64>, tau_max: Option<usize>) -> Result<f64> {
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    if rho == 0.0 {
        return Ok(1.0);
    }
    let n = a.nrows();
    let tau_max = tau_max.unwrap_or_else(|| ((10.0 * n as f64 / (1.0 - rho)).ceil() as usize).min(100_000));
    let step = a / rho;
    let mut pow = DMatrix::identity(n, n);
    let mut best: f64 = 1.0;
    for _ in 0..tau_max {
        pow = &pow * &step;
        best = best.max(spectral_norm(&pow));
    }
    Ok(best)
}

/// Solve `X = A X A^T + W` by repeated squaring (A must be Schur stable).
pub fn dlyap(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut ak = a.clone();
    let mut x = 0.5 * (w + w.transpose());
    for _ in 0..64 {
        let inc = &ak * &x * ak.transpose();
        x += &inc;
        let scale = x.abs().max().max(1e-300);
        if inc.abs().max() <= 1e-17 * scale {
            return Ok(0.5 * (&x + x.transpose()));
        }
        ak = &ak * &ak;
        if ak.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::Unstable(spectral_radius(a).unwrap_or(f64::NAN)))
}
