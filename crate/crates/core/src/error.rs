use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lambert W0 is undefined for x = {x} (requires x >= -1/e)")]
    LambertDomain { x: f64 },

    #[error("best response requested over an empty control set")]
    EmptyCosts,

    #[error("non-finite cost {value} at grid index {index}")]
    NonFiniteCost { index: usize, value: f64 },

    #[error("could not bracket the alignment equation root: {0}")]
    Bracketing(String),

    #[error("center of mass requested for a population with zero mass")]
    EmptyPopulation,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
