//! Simulation and reconstruction of two-photon time-frequency states measured
//! with an electro-optic spectral shearing interferometer (EOSI).
//!
//! The crate is organised along the measurement chain:
//!
//! * [`model`] builds joint spectral amplitudes (JSAs) with pump-chirp induced
//!   nonlocal phase, and analyses them (Schmidt decomposition, effective
//!   Schmidt rank, time-frequency views).
//! * [`interferometer`] forward-models the sheared/delayed coincidence pattern
//!   and draws Monte-Carlo event streams with detector blur and fringe drift.
//! * [`reconstruct`] recovers the complex JSA from interferograms: sideband
//!   filtering, contrast gating, phase concatenation, polynomial fits and the
//!   merge of the two measurement configurations.
//! * [`io`] holds the run configuration, the binary event log, state files and
//!   report emission used by the `eosi` command-line tool.
//!
//! Units throughout: angular frequency detunings in rad/fs, times in fs and
//! spectral phase coefficients in fs^n. Wavelengths only appear at the
//! configuration boundary, in nm.

// Validation is written as `!(x < limit)` on purpose so that NaN fails it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fourier;
pub mod interferometer;
pub mod io;
pub mod model;
pub mod reconstruct;
pub mod units;

pub use error::{Error, Result};
pub use interferometer::{
    expected_pattern, histogram, simulate_events, Configuration, DetectorModel, DriftKind,
    DriftModel, EventRecord, EventStream, Interferogram, ShearSettings, StreamHeader,
};
pub use io::{
    emit_report, load_config, read_events, read_result, read_state, write_events, write_result,
    write_state, RunConfig, SimulationRun,
};
pub use model::{
    build_state, effective_schmidt_rank, schmidt_decompose, to_time_frequency, BiphotonState,
    FrequencyGrid, Photon, SchmidtSpectrum, SourceConfig, TimeFrequencyView, ViewKind,
};
pub use reconstruct::{
    analyze, concatenate_phase, extract_sideband, fit_coefficients, gate_subsets,
    merge_configurations, phase_differential, reconstruct, AnalysisSummary, Estimate, FitDegree,
    FitReport, Measurement, PhaseSurface, ReconstructOptions, ReconstructionResult,
    SidebandExtraction,
};
