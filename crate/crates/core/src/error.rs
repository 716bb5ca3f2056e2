use thiserror::Error;

/// Errors produced by the simulation and analytic layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("cannot combine elements of {left} and {right}")]
    MixedGroups { left: String, right: String },

    #[error("coordinate overflow while multiplying group elements")]
    Overflow,

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("law is recurrent, the Green function diverges (use the potential kernel instead)")]
    Recurrent,

    #[error("law is transient: {0}")]
    Transient(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
