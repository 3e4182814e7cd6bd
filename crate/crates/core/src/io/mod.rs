//! Configuration, persistence and report emission for batch runs.
//!
//! A run directory written by the command-line tool contains some of:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | resolved run configuration |
//! | `events_signal.bin`, `events_idler.bin` | binary event logs ([`eventlog`]) |
//! | `state.json` | ground-truth state of a simulation |
//! | `result.json` | reconstruction result |
//! | `fit_summary.txt`, `analysis.txt`, `*.tsv` | report files ([`report`]) |

pub mod config;
pub mod eventlog;
pub mod report;
pub mod state;

use std::path::{Path, PathBuf};

pub use config::{
    derive_seed, load_config, parse_config, Acquisition, ConfigError, GridSpec, OutputSpec,
    PreparedRun, RunConfig, ShearPlan, ShearSpec, SimulationRun,
};
pub use eventlog::{
    decode_events, encode_events, read_events, write_events, EVENT_LOG_MAGIC, RECORD_BYTES,
};
pub use report::{emit_report, fit_summary_text, write_analysis, write_interferogram};
pub use state::{read_json, read_result, read_state, write_json, write_result, write_state};

pub const CONFIG_FILE: &str = "config.toml";
pub const STATE_FILE: &str = "state.json";
pub const RESULT_FILE: &str = "result.json";
pub const SIGNAL_EVENTS_FILE: &str = "events_signal.bin";
pub const IDLER_EVENTS_FILE: &str = "events_idler.bin";

/// Malformed or inaccessible files. Messages start with the violated
/// invariant.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("eventlog-version: expected `{}`, found `{found}`", EVENT_LOG_MAGIC)]
    Version { found: String },
    #[error("eventlog-header: line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("eventlog-truncated: header declares {expected} records, file holds {found} complete records")]
    Truncated { expected: usize, found: usize },
    #[error("eventlog-trailing-data: {extra_bytes} bytes after the declared records")]
    TrailingData { extra_bytes: usize },
    #[error("eventlog-record: {0}")]
    Record(String),
    #[error("state-format: {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("file-access: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub(crate) fn header(line: usize, message: impl Into<String>) -> Self {
        FormatError::Header {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
