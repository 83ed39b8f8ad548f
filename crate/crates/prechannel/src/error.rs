//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enum. Variants carry a human-readable diagnostic; callers
/// that need to branch (the CLI exit-code mapping, mostly) match on the
/// variant, everything else just bubbles the message up.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands live on different matrix spaces.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix or vector failed structural validation (not square, NaN
    /// entries, wrong length, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// An ensemble failed validation (empty support, bad probabilities,
    /// mixed dimensions, too many atoms).
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    /// A scalar or structural argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Jacobi sweep failed to reach the orthogonality threshold.
    #[error("singular value iteration did not converge within {0} sweeps")]
    SvdNoConvergence(usize),

    /// `exp(U t)` was requested outside the accurate range of the
    /// scaling-and-squaring approximant.
    #[error("matrix exponential overflow: {0}")]
    ExpmOverflow(String),

    /// An exhaustive enumeration would exceed the hard term budget.
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    /// A documented precondition of the called operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
