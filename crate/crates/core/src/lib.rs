//! Learning robust LQG controllers from a single input-output trajectory.
//!
//! [`lti`] holds the transfer-matrix algebra, [`sysid`] the least-squares
//! identification, [`iop`] the robust synthesis over the Youla parameter,
//! [`evaluation`] the Riccati baseline and certificates, and [`pipeline`]
//! the experiment driver.

mod error;
pub mod lti;
pub(crate) mod serde_mat;
pub mod iop;
pub mod sysid;
pub mod evaluation;
pub mod pipeline;

pub use error::{Error, Result};
