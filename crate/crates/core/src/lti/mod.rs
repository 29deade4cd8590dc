//! State-space and FIR algebra, simulation and norms.

pub mod fir;
pub mod linalg;
pub mod norms;
pub mod simulate;
pub mod statespace;

pub use fir::{fir_convolve, FirTm};
pub use linalg::{dlyap, phi_margin, psd_sqrt, spectral_norm, spectral_radius};
pub use norms::{h2_norm, h2_norm_weighted, hinf_grid_bounds, hinf_norm_grid, hinf_norm_sdp, hinf_norm_sdp_detail, HinfSdpReport};
pub use simulate::{simulate, Controller, Policy, Trajectory};
pub use statespace::{freq_response, markov_parameters, LqgWeights, StateSpace};
