//! Robust self-testing of quantum states through EPR-steering.
//!
//! The crate builds reference and physical steering experiments, evaluates
//! the analytic robustness bounds, applies the SWAP isometry, and solves the
//! moment-matrix semidefinite programs that lower-bound self-testing
//! fidelities.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod isometry;
pub mod linalg;
pub mod random;
pub mod sdp;

pub use error::{Error, Result};
