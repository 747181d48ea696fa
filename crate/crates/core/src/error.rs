use std::path::PathBuf;

use nalgebra::DVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative solver stopped before reaching its tolerance. `best` is the
    /// iterate with the smallest gradient norm seen.
    #[error("no convergence after {iterations} iterations (best gradient norm {grad_norm:e})")]
    ConvergenceFailure {
        best: DVector<f64>,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("non-finite or exploding iterate at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("aggregated Hessian is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: msg.into(),
        }
    }
}
