//! Discrete-time finite-particle mean-field Langevin dynamics for
//! entropy-regularized risk minimization over mean-field two-layer
//! networks, with divergence diagnostics and bound calculators.

pub mod bounds;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod rng;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
