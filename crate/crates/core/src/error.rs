use thiserror::Error;

use crate::numerics::NumericsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("cannot aggregate an empty set of trials")]
    EmptyAggregate,

    #[error("codebook format error on line {line}: {message}")]
    CodebookFormat { line: usize, message: String },

    #[error("trial {trial} (seed {seed:#018x}) failed: {source}")]
    Trial {
        seed: u64,
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
