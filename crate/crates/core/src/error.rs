use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("iterate became non-finite at step {step}")]
    NonFiniteIterate { step: u64 },

    #[error("pair-Gaussian construction needs an even dimension, got {0}")]
    OddDimension(usize),

    #[error("I - A is numerically singular (smallest singular value {0:e})")]
    SingularSystem(f64),

    #[error("J - I is numerically singular (smallest singular value {0:e})")]
    SingularJacobian(f64),

    #[error("norm {0} has no smoothness constant; use a large-p weighted surrogate")]
    UnsupportedNorm(&'static str),

    #[error("chain is reducible: eigenvalue-1 left eigenspace has dimension {0}")]
    ReducibleChain(usize),

    #[error("optimal Q-function is not greedily unique (gap {gap:e} <= tolerance {tol:e})")]
    GreedyNotUnique { gap: f64, tol: f64 },

    #[error("p = {p} does not exceed p_min = {p_min}; operator is not a contraction")]
    NotContractive { p: f64, p_min: f64 },

    #[error("behavior policy has no mass on (state {state}, action {action}) where the target policy does")]
    UnsupportedBehavior { state: usize, action: usize },

    #[error("matrix is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),

    #[error("sample is degenerate: {0}")]
    DegenerateSample(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Spec { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
