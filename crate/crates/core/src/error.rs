use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid game spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not an absorbing game: {0} non-absorbing states")]
    NotAbsorbing(usize),
    #[error("solver: {0}")]
    Lp(#[from] LpError),
    #[error("oracle budget exceeded: {needed} tableau cells > {budget}; smallest admissible tol is {min_tol:.3e}")]
    BudgetExceeded { needed: usize, budget: usize, min_tol: f64 },
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
