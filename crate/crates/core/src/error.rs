use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not stochastic: {0}")]
    NotStochastic(String),

    #[error("agent {agent} has no outgoing weight (zero row)")]
    ZeroRow { agent: usize },

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("non-contractive system: contraction factor {0} >= 1")]
    NonContractive(f64),

    #[error("empty configuration box: {0}")]
    EmptyBox(String),

    #[error("search space of {size} configurations exceeds the cap of {cap}")]
    SearchSpaceOverflow { size: u128, cap: u128 },

    #[error("invalid reduction: {0}")]
    Reduction(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("solver model failed validation: {0}")]
    ModelValidation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
