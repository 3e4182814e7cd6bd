//! JSON persistence of states and reconstruction results.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::FormatError;
use crate::model::BiphotonState;
use crate::reconstruct::ReconstructionResult;

/// Pretty JSON with exact (round-trip) float text.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| FormatError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| FormatError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// The state is re-validated (grids, shape, normalisation) on read.
pub fn write_state(state: &BiphotonState, path: impl AsRef<Path>) -> Result<(), FormatError> {
    write_json(state, path)
}

pub fn read_state(path: impl AsRef<Path>) -> Result<BiphotonState, FormatError> {
    read_json(path)
}

pub fn write_result(
    result: &ReconstructionResult,
    path: impl AsRef<Path>,
) -> Result<(), FormatError> {
    write_json(result, path)
}

pub fn read_result(path: impl AsRef<Path>) -> Result<ReconstructionResult, FormatError> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state, Photon, SourceConfig};

    #[test]
    fn state_round_trip_is_exact() {
        let cfg = SourceConfig {
            pump_chirp_fs2: -1.0e4,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 32).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 32).unwrap();
        let s = build_state(&cfg, &g1, &g2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        write_state(&s, &path).unwrap();
        assert_eq!(read_state(&path).unwrap(), s);
    }

    #[test]
    fn malformed_state_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        std::fs::write(&path, "{\"grid1\": 3}").unwrap();
        let err = read_state(&path).unwrap_err();
        assert!(err.to_string().starts_with("state-format"), "{err}");
    }
}
