use thiserror::Error;

/// Errors raised by constructors and operations in this crate.
///
/// Indices carried by variants are 1-based, matching the way states and
/// coefficients are written in operator files and reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsoError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("coordinate {index} is {value}, below the simplex tolerance")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("coordinate {index} is not finite")]
    NonFiniteCoordinate { index: usize },

    #[error("coordinates sum to {sum}, outside tolerance of 1")]
    SumDeviation { sum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("coefficient P[{i}{j},{k}] = {value} is outside [0, 1]")]
    CoefficientOutOfRange { i: usize, j: usize, k: usize, value: f64 },

    #[error("coefficients P[{i}{j},{k}] = {pij} and P[{j}{i},{k}] = {pji} differ")]
    Asymmetric { i: usize, j: usize, k: usize, pij: f64, pji: f64 },

    #[error("coefficients of pair ({i},{j}) sum to {sum} over k, expected 1")]
    RowSum { i: usize, j: usize, sum: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cylinder windows overlap: first ends at {first_end}, shifted second starts at {second_start}")]
    OverlappingWindows { first_end: usize, second_start: usize },

    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
}

impl QsoError {
    /// True for errors caused by malformed input text rather than invalid values.
    pub fn is_parse(&self) -> bool {
        matches!(self, QsoError::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, QsoError>;
