use thiserror::Error;

/// Errors produced by the numerical layers of the crate.
///
/// Non-convergence of the STLN iteration is deliberately *not* an error;
/// it is reported through [`crate::stln::StlnState::converged`] and
/// [`crate::radius::RadiusResult::converged`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value (NaN or infinity) in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix pencil: det(sE - A) vanishes identically; the spectral rank test is inconclusive")]
    SingularPencil,

    #[error("empty perturbation structure: the mask frees no entries")]
    EmptyMask,

    #[error("structural violation: nonzero perturbation at fixed {matrix} entry ({row}, {col})")]
    StructuralViolation {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("partition column {col} out of range for a matrix with {ncols} columns")]
    PartitionOutOfRange { col: usize, ncols: usize },

    #[error("coordinate vector length {found} does not match the {expected} basis parameters")]
    CoordinateLength { expected: usize, found: usize },

    #[error("least-squares subproblem is numerically singular{}", if *.suggest_smaller_omega { "; consider a smaller omega weight" } else { "" })]
    SingularLeastSquares { suggest_smaller_omega: bool },
}

pub type Result<T> = std::result::Result<T, Error>;
