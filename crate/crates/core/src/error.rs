use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("{what}: n = {got} exceeds the brute-force guard {limit}")]
    SizeGuard {
        what: &'static str,
        limit: u64,
        got: u64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("edge density {0} violates 0 < p < 1 - 1/e^2")]
    Hypothesis(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("j = n/k must be an integer (n = {n}, k = {k})")]
    NonIntegralPartSize { n: u64, k: u64 },

    #[error("no n_j exists for j = {0} (gamma left [j-10, j+10] before both conditions held)")]
    NotFound(u64),

    #[error("scan budget exceeded while searching for n_j with j = {0}")]
    ScanBudget(u64),

    #[error("first moment is zero; second-moment ratio undefined")]
    ZeroFirstMoment,

    #[error("time limit reached")]
    Timeout,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
