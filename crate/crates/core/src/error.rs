use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Dense Cholesky met a non-positive pivot (0-based index).
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },

    /// Inverting a named weight block failed.
    #[error("{name} + rho*I is not positive definite (block {block}, pivot {index})")]
    InversionFailed {
        name: &'static str,
        block: usize,
        index: usize,
    },

    /// Structured factorization breakdown in block `block` (1-based) at row `index` (0-based).
    #[error("non-positive pivot in block {block}, row {index}: W is not numerically positive definite")]
    NonPositivePivot { block: usize, index: usize },

    #[error("invalid problem: {}", .0.join("; "))]
    InvalidProblem(Vec<String>),

    #[error("factorization was built with rho = {factor}, solver configured with rho = {config}")]
    RhoMismatch { factor: f64, config: f64 },

    #[error("solver requires a diagonal cost matrix H")]
    NonDiagonalH,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("no feasible active-set candidate found")]
    NoFeasibleCandidate,

    #[error("brute-force enumeration limited to {limit} variables, got {found}")]
    TooLarge { limit: usize, found: usize },

    #[error("solver iterates became non-finite")]
    Diverged,

    #[error("plant: {0}")]
    Plant(String),

    #[error("closed loop aborted at step {step}: {source}")]
    Simulation { step: usize, source: Box<Error> },

    #[error("{0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
