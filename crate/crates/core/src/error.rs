use thiserror::Error;

/// Errors raised by problem construction, the solvers and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure in {stage} at iteration {iteration}: {detail}")]
    Numerical {
        stage: &'static str,
        iteration: usize,
        detail: String,
    },
    /// Naive IBP hit a zero kernel row or a non-finite scaling.
    #[error("underflow-degenerate: IBP kernel or scalings left the representable range at iteration {iteration}")]
    UnderflowDegenerate { iteration: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
