//! Multi-user Alamouti / quasi-orthogonal space-time code detection: matrix
//! kernel, codes, fading model, detectors, closed-form verifiers and a
//! deterministic Monte Carlo harness.

pub mod analysis;
pub mod cxmat;
pub mod detect;
pub mod error;
pub mod fading;
pub mod harness;
pub mod montecarlo;
pub mod stcodes;

pub use error::{Error, Result};
