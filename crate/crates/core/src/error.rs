use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("column {column} has zero sample variance")]
    DegenerateColumn { column: usize },

    #[error("partial correlation needs p >= n (got n = {n}, p = {p})")]
    Regime { n: usize, p: usize },

    #[error("B matrix is numerically singular (condition number {condition:e} exceeds cap {cap:e})")]
    Singular { condition: f64, cap: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("exhaustive scan needs {needed} subsets, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated in trial {trial}: {detail}")]
    Invariant { trial: usize, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: impl ToString, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            reason,
        }
    }
}
