use crate::interferometer::InterferometerError;
use crate::io::{ConfigError, FormatError};
use crate::model::ModelError;
use crate::reconstruct::ReconstructError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Every variant's message starts with the name of the
/// violated invariant so the CLI can report it verbatim.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Interferometer(#[from] InterferometerError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
