//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input shapes do not line up (empty vectors, mismatched lengths, ...).
    #[error("dimension error in {context}: {details}")]
    Dimension {
        context: &'static str,
        details: String,
    },

    /// A matrix required to be Hermitian failed the tolerance check.
    #[error("`{matrix}` is not Hermitian within the contract tolerance")]
    NotHermitian { matrix: String },

    /// An HPD solve was refused because the matrix is numerically singular.
    #[error("`{matrix}` is numerically singular (condition estimate {estimate:.3e})")]
    Singular { matrix: String, estimate: f64 },

    /// A contract precondition was violated (negative energy, zero signature, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The optimizer hit a direction it cannot resolve (e.g. zero weight solution).
    #[error("degenerate direction: {0}")]
    Degenerate(String),

    /// Scenario / sweep configuration problem, with the offending field.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Filesystem failure, annotated with the path involved.
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn dimension(context: &'static str, details: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            details: details.into(),
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
