use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cardinality {axis} must be at least 1")]
    ZeroCardinality { axis: &'static str },

    #[error("{cells} cells exceed the configured cap of {cap}")]
    CellCapExceeded { cells: usize, cap: usize },

    #[error("expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("entry at flat index {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("entry at flat index {index} is negative ({value})")]
    NegativeMass { index: usize, value: f64 },

    #[error("entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("{what} disagree at index {index} by {deviation:e}")]
    InconsistentMarginals {
        what: &'static str,
        index: usize,
        deviation: f64,
    },

    #[error("the modality-pair marginal p(x1,x2) is required (needs unlabeled multimodal data)")]
    MissingPairMarginal,

    #[error("solution violates the marginal constraints by {violation:e} (limit {limit:e})")]
    StaleSolution { violation: f64, limit: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("row {row}: {column} code {code} is outside [0, {card})")]
    CodeOutOfRange {
        row: usize,
        column: &'static str,
        code: usize,
        card: usize,
    },

    #[error("PID profile has zero total information")]
    DegenerateProfile,

    #[error("model library is empty")]
    EmptyLibrary,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
