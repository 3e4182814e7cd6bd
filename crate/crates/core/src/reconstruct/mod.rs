//! Reconstruction of the complex JSA from EOSI interferograms.
//!
//! Per configuration: histogram the event stream into subsets, isolate the
//! `T = +tau` sideband of each subset, gate on fringe contrast, extract and
//! concatenate the phase differential, and fit polynomial phase
//! coefficients. The two configurations are then merged into one state and
//! analysed for entanglement.

mod analysis;
mod fit;
mod merge;
mod phase;
mod sideband;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::interferometer::{histogram, Configuration, EventStream, InterferometerError};
use crate::model::{BiphotonState, ModelError};

pub use analysis::{analyze, analyze_state, AnalysisSummary, SCHMIDT_REPORT_COUNT};
pub use fit::{fit_coefficients, fit_surface, Coefficients, Estimate, FitDegree, FitReport, Term};
pub use merge::{
    assemble_state, jsi_estimate, merge_configurations, merged_jsi, phase_polynomial,
    ConfigurationResult, Measured, MergedState,
};
pub use phase::{
    concatenate_phase, phase_differential, PhaseSurface, MAX_UNWRAP_STEP, MIN_SIDEBAND_SNR,
    SIGNAL_FLOOR,
};
pub use sideband::{
    extract_measurement, extract_sideband, gate_subsets, pooled_baseband, GateOutcome, Measurement,
    SidebandExtraction, CONTRAST_SCALE, DEFAULT_CONTRAST_THRESHOLD, NOISE_MARGIN_SIGMAS,
};

/// Default number of events per subset.
pub const DEFAULT_SUBSET_SIZE: usize = 5000;

#[derive(Debug, thiserror::Error)]
pub enum ReconstructError {
    #[error("histogram-nonzero: the measurement contains no counts")]
    EmptyMeasurement,
    #[error(
        "sideband-not-found: no sideband power above the shot-noise floor near T = {delay} fs"
    )]
    SidebandNotFound { delay: f64 },
    #[error("gate-threshold: contrast threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("gate-no-subsets: every subset failed the contrast gate or the phase analysis ({rejected} rejected)")]
    NoAcceptedSubsets { rejected: usize },
    #[error("phase-mask-empty: no bins carry enough signal for phase extraction")]
    EmptyMask,
    #[error("fit-rank-deficient: the masked region does not determine the phase coefficients")]
    RankDeficient,
    #[error("grid-mismatch: the two configurations were measured on incommensurate grids")]
    GridMismatch,
    #[error("configuration-pair: need one signal-in-eosi and one idler-in-eosi measurement")]
    ConfigurationPair,
    #[error(transparent)]
    Interferometer(#[from] InterferometerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructOptions {
    pub subset_size: usize,
    /// Gate on visibility, the contrast as a fraction of [`CONTRAST_SCALE`].
    pub contrast_threshold: f64,
    pub degree: FitDegree,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            subset_size: DEFAULT_SUBSET_SIZE,
            contrast_threshold: DEFAULT_CONTRAST_THRESHOLD,
            degree: FitDegree::Quadratic,
        }
    }
}

/// Merged reconstruction with subset-statistics uncertainties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub jsa: BiphotonState,
    pub fit_signal: FitReport,
    pub fit_idler: FitReport,
    /// Merged coefficients in source coordinates.
    pub coefficients: BTreeMap<Term, Measured>,
    pub inconsistent: bool,
    /// Leading Schmidt coefficients of `jsa`.
    pub schmidt_values: Vec<f64>,
    /// Standard deviation of each leading coefficient over per-subset states.
    pub schmidt_sigma: Vec<f64>,
    pub k_full: Measured,
    pub k_modulus: Measured,
}

impl ReconstructionResult {
    pub fn phi11(&self) -> Measured {
        self.coefficients[&Term::Phi11]
    }

    pub fn fit(&self, configuration: Configuration) -> &FitReport {
        match configuration {
            Configuration::SignalInEosi => &self.fit_signal,
            Configuration::IdlerInEosi => &self.fit_idler,
        }
    }
}

/// Everything kept from one configuration's accepted subsets.
#[derive(Clone, Debug)]
pub struct ConfigurationAnalysis {
    pub result: ConfigurationResult,
    /// Normalised JSI estimate with each accepted subset left out in turn.
    pub leave_one_out_jsi: Vec<Array2<f64>>,
}

/// Runs extraction, gating, phase analysis and fitting on the subsets of one
/// configuration. Subsets without a detectable sideband, below the gate, or
/// whose phase analysis fails are rejected.
pub fn analyse_configuration(
    subsets: &[Measurement],
    opts: &ReconstructOptions,
) -> Result<ConfigurationAnalysis, ReconstructError> {
    let first = subsets
        .first()
        .ok_or(ReconstructError::NoAcceptedSubsets { rejected: 0 })?;
    let settings = first.settings;
    let configuration = settings.configuration();
    let m = settings.shear_index(&first.sheared_grid)?;

    let mut rejected = 0;
    let mut extractions = Vec::new();
    for meas in subsets {
        match extract_measurement(meas) {
            Ok(e) => extractions.push(e),
            Err(ReconstructError::SidebandNotFound { .. }) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    let gated = if extractions.is_empty() {
        return Err(ReconstructError::NoAcceptedSubsets { rejected });
    } else {
        gate_subsets(extractions, opts.contrast_threshold).map_err(|e| match e {
            ReconstructError::NoAcceptedSubsets { rejected: r } => {
                ReconstructError::NoAcceptedSubsets {
                    rejected: r + rejected,
                }
            }
            other => other,
        })?
    };
    rejected += gated.rejected;

    let mut samples = Vec::new();
    let mut basebands = Vec::new();
    for ext in gated.accepted {
        let fitted = phase_differential(&ext, &settings)
            .and_then(|d| concatenate_phase(&d, &settings))
            .and_then(|phi| fit_surface(&phi, configuration, opts.degree));
        match fitted {
            Ok(c) => {
                samples.push(c);
                basebands.push(ext.baseband);
            }
            Err(ReconstructError::EmptyMask | ReconstructError::RankDeficient) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(ReconstructError::NoAcceptedSubsets { rejected });
    }

    let mut pooled = Array2::zeros(basebands[0].dim());
    for b in &basebands {
        pooled += b;
    }
    let jsi = jsi_estimate(&pooled, m, configuration);
    let leave_one_out_jsi = if basebands.len() > 1 {
        basebands
            .iter()
            .map(|b| jsi_estimate(&(&pooled - b), m, configuration))
            .collect()
    } else {
        Vec::new()
    };
    let (grid1, grid2) = match configuration {
        Configuration::SignalInEosi => (first.sheared_grid, first.herald_grid),
        Configuration::IdlerInEosi => (first.herald_grid, first.sheared_grid),
    };
    Ok(ConfigurationAnalysis {
        result: ConfigurationResult {
            report: FitReport::from_samples(configuration, opts.degree, samples, rejected),
            jsi,
            grid1,
            grid2,
        },
        leave_one_out_jsi,
    })
}

/// Full reconstruction from per-configuration measurement subsets.
pub fn reconstruct_measurements(
    subsets_a: &[Measurement],
    subsets_b: &[Measurement],
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult, ReconstructError> {
    let a = analyse_configuration(subsets_a, opts)?;
    let b = analyse_configuration(subsets_b, opts)?;
    analysis::combine(a, b)
}

/// Full reconstruction from the two event streams (in either order).
pub fn reconstruct(
    stream_a: &EventStream,
    stream_b: &EventStream,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult, ReconstructError> {
    if stream_a.header.configuration() == stream_b.header.configuration() {
        return Err(ReconstructError::ConfigurationPair);
    }
    let subsets = |s: &EventStream| -> Result<Vec<Measurement>, ReconstructError> {
        Ok(histogram(s, opts.subset_size)?
            .iter()
            .map(Measurement::from_interferogram)
            .collect())
    };
    reconstruct_measurements(&subsets(stream_a)?, &subsets(stream_b)?, opts)
}
