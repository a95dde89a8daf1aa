//! Reproducible experiment orchestration: scaling, convergence,
//! propagation-of-chaos, and identity-verification studies over the
//! mean-field Langevin core, with deterministic CSV/JSON/SVG emission.

use thiserror::Error;

pub mod config;
pub mod emit;
pub mod report;
pub mod stats;
pub mod studies;
pub mod svg;
pub mod toys;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),

    #[error("study precondition: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("replay mismatch: {0} differs from the regenerated contents")]
    ReplayMismatch(String),

    #[error(transparent)]
    Core(#[from] mfld_core::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
