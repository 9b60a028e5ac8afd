use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Jacobi identity fails on (e{i}, e{j}, e{k}): residual {residual}")]
    JacobiViolation { i: usize, j: usize, k: usize, residual: String },

    #[error("algebra is not nilpotent: lower central series stabilizes at dimension {stable_dim}")]
    NotNilpotent { stable_dim: usize },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("{path}:{line}:{column}: {message}")]
    FileFormat { path: String, line: usize, column: usize, message: String },

    #[error("syntax error at position {position}: expected {}", expected.join(" or "))]
    Syntax { position: usize, expected: Vec<String> },

    #[error("unknown symbol `{name}` at position {position}")]
    UnknownSymbol { name: String, position: usize },

    #[error("function `{function}` takes 1 argument, got {got} (position {position})")]
    Arity { function: String, got: usize, position: usize },

    #[error("domain error: {message} at {point:?}")]
    Domain { message: String, point: Vec<f64> },

    #[error("cup product degree {k}+{l} exceeds dimension {dim}")]
    DegreeOverflow { k: usize, l: usize, dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target lies within {distance:e} of the image of the window boundary")]
    BoundaryTooClose { distance: f64 },

    #[error("no regular value found near the target after {retries} perturbations")]
    SingularTarget { retries: usize },

    #[error("ill-conditioned frame (|det| = {det:e}) at {point:?}")]
    IllConditionedFrame { det: f64, point: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
