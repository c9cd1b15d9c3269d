use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where the physics is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A fermionic configuration asks for more particles than available cells.
    #[error("occupancy error: mean count {mean} exceeds the {capacity} available phase-space cells")]
    Occupancy { mean: f64, capacity: f64 },

    #[error("paraxial approximation violated: grid extent {extent} m is not small against distance {distance} m")]
    Paraxial { extent: f64, distance: f64 },

    #[error("kernel validation failed: {0}")]
    Kernel(String),

    #[error("unsupported geometry: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("histogram bins do not match")]
    BinMismatch,

    #[error("fit failed after {iterations} iterations: {reason}")]
    Fit { iterations: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command line front end:
    /// 1 configuration, 2 physics domain, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension { .. } => 1,
            Error::Io { .. } | Error::Parse { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
