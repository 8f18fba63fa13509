use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not skew-symmetric: max |M + M^T| = {deviation:e}")]
    NotSkewSymmetric { deviation: f64 },

    #[error("invalid pair ({i}, {j}) for {n} players")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("invalid comparison data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular value decomposition failed to converge")]
    SvdFailure,

    #[error("non-finite objective or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("comparison graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("maximum likelihood estimate does not exist: {0}")]
    Degenerate(String),

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("line search failed after {backtracks} backtracks on both trajectories")]
    LineSearchFailed { backtracks: usize },

    #[error("unknown player label `{0}`")]
    UnknownPlayer(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed match records: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
