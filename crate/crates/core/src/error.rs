//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("no start symbol: grammar has no `start:` header and no productions")]
    NoStart,

    #[error("bad weight at line {line}: {reason}")]
    BadWeight { line: usize, reason: String },

    #[error("fixed point did not converge: {0}")]
    NonConvergent(String),

    #[error("star diverges: {0}")]
    Divergent(String),

    #[error("prefix weights requested without closure tables")]
    NeedsTables,

    #[error("weighted input: {0} requires trivial weights (pass the forget flag to project)")]
    WeightedInput(String),

    #[error("epsilon arcs present: {0}")]
    EpsilonArcs(String),

    #[error("derivations are not finite: {0}")]
    Infinite(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time budget exceeded: {0}")]
    TimeBudgetExceeded(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
