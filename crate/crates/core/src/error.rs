use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{n} qubits exceeds the limit of {max}")]
    ResourceLimit { n: usize, max: usize },

    #[error("operator is not Hermitian: {0}")]
    NonHermitian(String),

    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("estimate collapsed: {0}")]
    Collapsed(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
