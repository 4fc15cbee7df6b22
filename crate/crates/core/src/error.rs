use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("truncation deficit {deficit:.3e} exceeds limit {limit:.1e}")]
    Truncation { deficit: f64, limit: f64 },

    #[error("degenerate zero-order spectrum: eigenvalues {i} and {j} differ by {gap:.3e}")]
    Degenerate { i: usize, j: usize, gap: f64 },

    #[error("singular point: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
