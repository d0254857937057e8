use thiserror::Error;

/// Errors raised by the quasiperiodic Maxwell toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid projection matrix: {0}")]
    InvalidProjection(String),

    #[error("truncation N must be even and at least 2, got {0}")]
    InvalidTruncation(usize),

    #[error("reduced bound M must be positive, got {0}")]
    InvalidReducedBound(f64),

    #[error("polarization frame is undefined for the zero wavevector")]
    ZeroMode,

    #[error("index set is empty")]
    EmptyIndexSet,

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("variable x{index} exceeds the torus dimension {n}")]
    VariableOutOfRange { index: usize, n: usize },

    #[error("sqrt of a negative constant ({0})")]
    NegativeSqrt(f64),

    #[error("division by zero while evaluating expression")]
    DivisionByZero,

    #[error("permittivity is not strictly positive: value {value} at grid point {index}")]
    NonPositivePermittivity { value: f64, index: usize },

    #[error("non-finite value {value} at grid point {index}")]
    NonFinite { value: f64, index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem too large for the dense oracle: {dof} > {limit}")]
    OracleTooLarge { dof: usize, limit: usize },

    #[error("GMRES did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    GmresNotConverged { residual: f64, iterations: usize },

    #[error("QR iteration failed to converge on a {0}×{0} Hessenberg matrix")]
    QrNotConverged(usize),

    #[error("eigensolver stagnated: {converged} of {requested} pairs converged after {restarts} restarts")]
    EigenNotConverged {
        converged: usize,
        requested: usize,
        restarts: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of an iterative solver to reach its tolerance.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::GmresNotConverged { .. } | Error::EigenNotConverged { .. }
        )
    }
}
