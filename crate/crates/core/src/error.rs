//! Error taxonomy shared across the crate.
//!
//! Numerical predicates in this crate are tolerance-based, so most variants
//! carry the offending value together with the threshold it was tested
//! against. Messages are written to be actionable from the command line.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix entry was NaN or infinite at construction time.
    #[error("matrix entry at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    /// Row/column counts don't line up for the requested operation.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A matrix expected to be Hermitian deviates from its own adjoint.
    #[error("matrix is not Hermitian: max |M - M*| entry is {deviation:.3e}, tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    /// A metric eigenvalue is negative beyond the relative tolerance.
    #[error("metric is not positive semidefinite: eigenvalue {value:.6e} is below {threshold:.6e}")]
    NotPositive { value: f64, threshold: f64 },

    /// An eigenvalue handed to a rank count is negative beyond tolerance.
    #[error("eigenvalue {value:.6e} is negative beyond tolerance (threshold {threshold:.6e})")]
    NegativeEigenvalue { value: f64, threshold: f64 },

    /// The metric has no eigenvalue above the rank cutoff; the seminorm
    /// would be identically zero and nothing in this crate is defined.
    #[error("metric is zero (no eigenvalue above the rank cutoff)")]
    ZeroMetric,

    /// Iterative eigenvalue computation did not converge.
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,

    /// The operator moves the metric's null space off itself, so no adjoint
    /// with respect to the metric exists and seminorm quantities are
    /// unbounded on the quotient.
    #[error("operator{context} is not compatible with the metric: it maps the metric's null space \
             outside itself (kernel-invariance residual {residual:.3e} exceeds {threshold:.3e})")]
    NotCompatible {
        residual: f64,
        threshold: f64,
        /// Empty for a plain operator; names the block (" P", " Q", ...) inside a 2x2 assembly.
        context: String,
    },

    /// A generator was asked for a metric rank outside `1..=dim`.
    #[error("metric rank {rank} is outside 1..={dim}")]
    BadRank { rank: usize, dim: usize },

    /// A run configuration that cannot be executed (e.g. zero trials).
    #[error("invalid configuration: {0}")]
    BadConfig(String),

    /// An inequality id that is not in the registry.
    #[error("unknown bound id `{0}`")]
    UnknownBound(String),

    /// The operand list does not match the bound's arity.
    #[error("bound `{id}` takes {expected} operand(s), got {got}")]
    WrongArity { id: String, expected: usize, got: usize },

    /// Two bounds asked to share operands in a comparison take different
    /// operand shapes.
    #[error("bounds `{a}` and `{b}` take different operand shapes and cannot be compared")]
    IncompatibleOperandRoles { a: String, b: String },

    /// A weight parameter outside its domain.
    #[error("lambda = {0} is outside [0, 1]")]
    LambdaOutOfRange(f64),

    /// A bound was evaluated on operands that violate its precondition.
    #[error("bound `{id}` precondition failed: {detail}")]
    Precondition { id: String, detail: String },

    /// Malformed matrix or report JSON.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
