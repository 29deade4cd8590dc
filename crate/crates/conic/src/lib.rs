//! First-order conic solver.
//!
//! Solves `min 1/2 x'Px + q'x` subject to `Ax + s = b`, `s` in a product of
//! zero, nonnegative, second-order and PSD cones, by ADMM with a cached
//! factorization of the x-update matrix. Deterministic for identical inputs.

mod admm;
pub mod cones;
mod kkt;
mod problem;
pub mod sparse;

pub use admm::{solve, solve_warm};
pub use cones::{mat_to_svec, project_psd, project_soc, svec_index, svec_len, svec_to_mat, Cone};
pub use problem::{ConeProblem, ConeSolution, ConicError, Residuals, Settings, Status, WarmStart};
pub use sparse::CsrMatrix;
