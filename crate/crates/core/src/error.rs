use thiserror::Error;

/// Errors shared by the model, dynamics, diagnostics, and bounds modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("step size precondition violated: eta * lambda_prime = {0} must be < 1/2")]
    StepSizeTooLarge(f64),

    #[error("noise shape mismatch: expected {expected} draws, got {got}")]
    NoiseShape { expected: usize, got: usize },

    #[error("run diverged at step {step}: coordinate magnitude exceeded {limit:e}")]
    Diverged { step: usize, limit: f64 },

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("normalization requires dimension <= 2, got {0}")]
    DimensionTooHigh(usize),

    #[error("sample size cap exceeded: {got} > {cap}")]
    SizeCap { got: usize, cap: usize },

    #[error("sample sets must have equal sizes: {a} vs {b}")]
    SizeMismatch { a: usize, b: usize },

    #[error("rejection sampler exhausted {0} attempts")]
    RejectionExhausted(usize),

    #[error("missing constant for bound evaluation: {0}")]
    MissingConstant(&'static str),

    #[error("io error: {0}")]
    Io(String),

    #[error("{0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
