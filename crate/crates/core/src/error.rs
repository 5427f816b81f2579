use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("system is not controllable: controllability rank {rank} < {n}")]
    UncontrollableSystem { rank: usize, n: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("polynomial degree {degree} is below the largest relative degree {required}")]
    DegreeTooLow { degree: usize, required: usize },

    #[error("polynomial degree {degree} outside the supported range 1..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}
