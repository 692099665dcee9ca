use thiserror::Error;

/// Errors produced by the modelling, fitting and ingestion layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("logistic fit separated: coefficients hit the cap of {cap}")]
    Separation { capped: Vec<f64>, cap: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("group {group} is empty (effective size {mass:.3e})")]
    EmptyGroup { group: usize, mass: f64 },

    #[error("group {group} has zero total degree; multinomial rates undefined")]
    DegenerateDegree { group: usize },

    #[error("all {restarts} restarts failed: {causes:?}")]
    Fit {
        restarts: usize,
        causes: Vec<String>,
    },

    #[error("model selection failed for every K: {0:?}")]
    Select(Vec<String>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error("covariates missing for nodes {missing:?}")]
    Join { missing: Vec<String> },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
