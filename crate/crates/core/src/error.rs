use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (bad dimension, bad parameter).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The randomized orthogonal-array search exhausted its budget.
    #[error(
        "no full-rank design found after {attempts} candidates \
         (best model-matrix rank {best_rank} of {required})"
    )]
    DesignSearch {
        attempts: usize,
        best_rank: usize,
        required: usize,
    },

    /// No Hadamard construction is known to this crate for the requested order.
    #[error("no Hadamard matrix construction available for order {0}")]
    UnsupportedOrder(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
