use thiserror::Error;

/// Errors raised by model evaluation, simulation and path optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix (determinant estimate {det:e})")]
    SingularMatrix { det: f64 },

    #[error("simulation diverged at step {step}{}", sample.map(|s| format!(" of sample {s}")).unwrap_or_default())]
    SimulationDiverged { step: usize, sample: Option<usize> },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("model condition violated: {0}")]
    ConditionViolated(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by numerics (singular diffusion, blow-up,
    /// NaN) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularMatrix { .. } | Error::SimulationDiverged { .. } | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
