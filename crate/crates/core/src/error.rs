use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The gradient of a norm is undefined at the origin.
    #[error("singular point: gradient of the norm is undefined at the origin")]
    SingularPoint,

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The requested eigenvalue lies below the eigenvalue of the full
    /// symmetrized domain, which contradicts the Faber-Krahn ordering.
    #[error("infeasible: target eigenvalue {target} is below the symmetrized-domain eigenvalue {floor}")]
    Infeasible { target: f64, floor: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
