use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("variable x{index} at byte {offset} is out of range for dimension {dim}")]
    VariableOutOfRange { offset: usize, index: usize, dim: usize },
    #[error("exponent at byte {offset} must be a nonnegative integer constant")]
    BadExponent { offset: usize },
}

#[derive(Debug, Error)]
pub enum VviError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("variable index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid convex set: {0}")]
    InvalidSet(String),
    #[error("projection did not converge after {cycles} cycles (last increment {increment:e})")]
    ProjectionNotConverged { cycles: usize, increment: f64 },
    #[error("invalid simplex weight: {0}")]
    InvalidWeight(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point is not in the constraint set")]
    NotInSet,
    #[error("problem file error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("cloud format error: {0}")]
    Cloud(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VviError>;
