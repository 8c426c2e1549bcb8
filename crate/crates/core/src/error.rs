use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stale tape: recorded at parameter version {tape}, network is at {net}")]
    StaleTape { tape: u64, net: u64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid value for `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("search failed: {0}")]
    Search(String),

    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: impl ToString) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.to_string(),
        }
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
