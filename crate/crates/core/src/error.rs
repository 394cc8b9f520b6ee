use std::path::PathBuf;

use thiserror::Error;

use crate::field::FieldPair;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// The explicit iteration produced a non-finite value. Carries the last
    /// state in which every entry was finite.
    #[error("iteration diverged at step {iteration}: non-finite value at node ({i}, {j})")]
    Diverged {
        iteration: usize,
        i: usize,
        j: usize,
        last_finite: Box<FieldPair>,
    },

    #[error("{0}")]
    Analysis(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
