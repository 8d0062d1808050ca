use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::cluster::ClusterError;
use crate::dynamics::DynamicsError;
use crate::factor::FactorError;
use crate::ingest::IngestError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for the pipeline and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("config error: {0}")]
    Config(String),
    #[error("no data points")]
    NoData,
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("schema error in {}: {message}", .path.display())]
    Schema { path: PathBuf, message: String },
    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 0 success, 1 other failure, 2 config, 3 auth,
    /// 4 no data, 5 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Ingest(IngestError::Auth { .. }) => 3,
            Error::Ingest(IngestError::InvalidWindow(_)) => 2,
            Error::NoData => 4,
            Error::Factor(_) => 5,
            Error::Cluster(ClusterError::InvalidCandidateRange(_)) => 5,
            Error::Cluster(_) => 2,
            Error::Dynamics(_) => 5,
            _ => 1,
        }
    }
}
