use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the failure classes the harness distinguishes when
/// choosing an exit code: configuration mistakes are the caller's fault,
/// domain and range errors come from evaluating a function outside its
/// support, and resource errors guard the desk-scale limits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
