//! Crate error type.

use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants are grouped by how the command-line driver maps them to exit
/// codes: precondition/usage problems, verification failures, and numeric
/// breakdowns are distinguished deliberately.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix element lies outside the dense open cell (vanishing pivot)")]
    NotInBigCell,

    #[error("principal branch undefined for this argument")]
    BranchCut,

    #[error("operator is not proportional to the expected equivariant map (relative residual {residual:.3e})")]
    NotProportional { residual: f64 },

    #[error("no intertwining solution of the required block-unipotent form (residual {residual:.3e})")]
    NoSolution { residual: f64 },

    #[error("chain step undefined: {0}")]
    InadmissibleChain(String),

    #[error("Gram block at degree {degree} is not positive definite (min eigenvalue {min_eig:.3e})")]
    IndefiniteGram { degree: usize, min_eig: f64 },

    #[error("Gram block at degree {degree} is numerically singular")]
    SingularGram { degree: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric breakdown: {0}")]
    NumericBreakdown(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
