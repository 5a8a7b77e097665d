use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {what} has length {got}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("slab precision at triple {index} is {value}, must be positive")]
    NonPositivePrecision { index: usize, value: f64 },

    #[error("visible precision is not positive definite for configuration {config}")]
    NotPositiveDefinite { config: String },

    #[error("enumeration budget exceeded: {needed} binary variables, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("non-finite value in {stage} (sweep {sweep})")]
    NonFinite { stage: &'static str, sweep: usize },

    #[error("non-finite gradient in {0}; update aborted")]
    NonFiniteGradient(&'static str),

    #[error("constraint violated after update {update}: {detail}")]
    ConstraintViolation { update: usize, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate labels: need at least two classes, got {0}")]
    DegenerateLabels(usize),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}
