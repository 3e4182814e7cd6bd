//! Assembly of the full JSA from the two measurement configurations.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Coefficients, FitReport, ReconstructError, Term};
use crate::interferometer::Configuration;
use crate::model::{BiphotonState, FrequencyGrid};

/// A value with a one-sigma uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Measured { value, sigma }
    }
}

/// What one configuration contributes to the merge.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationResult {
    pub report: FitReport,
    /// JSI estimate in source orientation `[signal, idler]`, summing to one.
    pub jsi: Array2<f64>,
    pub grid1: FrequencyGrid,
    pub grid2: FrequencyGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergedState {
    pub state: BiphotonState,
    /// Coefficients in source coordinates; terms measured in both
    /// configurations are inverse-variance combined.
    pub coefficients: BTreeMap<Term, Measured>,
    /// Set when the two `phi11` estimates differ by more than three combined
    /// standard errors.
    pub inconsistent: bool,
}

/// JSI estimate from a pooled baseband `B(w) = 1/4 [S(w) + S(w + Omega)]`
/// oriented `[sheared, herald]`: `1/2 [B(w) + B(w - Omega)]`, clamped at zero,
/// normalised to unit sum and returned in `[signal, idler]` orientation.
pub fn jsi_estimate(
    baseband: &Array2<f64>,
    shear_index: usize,
    configuration: Configuration,
) -> Array2<f64> {
    let (n, nh) = baseband.dim();
    let mut est = Array2::from_shape_fn((n, nh), |(i, j)| {
        let shifted = if i >= shear_index {
            baseband[[i - shear_index, j]]
        } else {
            0.0
        };
        (0.5 * (baseband[[i, j]] + shifted)).max(0.0)
    });
    let total = est.sum();
    if total > 0.0 {
        est /= total;
    }
    match configuration {
        Configuration::SignalInEosi => est,
        Configuration::IdlerInEosi => est.t().to_owned(),
    }
}

/// Evaluates `sum c_pq dw1^p dw2^q` on the grids.
pub fn phase_polynomial(
    coefficients: &Coefficients,
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
) -> Array2<f64> {
    let x = grid1.detunings();
    let y = grid2.detunings();
    Array2::from_shape_fn((x.len(), y.len()), |(i, j)| {
        coefficients
            .iter()
            .map(|(t, c)| {
                let (p, q) = t.powers();
                c * x[i].powi(p) * y[j].powi(q)
            })
            .sum()
    })
}

/// State with modulus `sqrt(jsi)` and the polynomial phase of `coefficients`.
pub fn assemble_state(
    jsi: &Array2<f64>,
    coefficients: &Coefficients,
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
) -> Result<BiphotonState, ReconstructError> {
    let phase = phase_polynomial(coefficients, grid1, grid2);
    let amplitude = Array2::from_shape_fn(jsi.dim(), |(i, j)| {
        Complex64::from_polar(jsi[[i, j]].max(0.0).sqrt(), phase[[i, j]])
    });
    Ok(BiphotonState::new(*grid1, *grid2, amplitude)?)
}

/// Average of the two normalised JSI estimates.
pub fn merged_jsi(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    (a + b) * 0.5
}

/// Inverse-variance weighted mean of two estimates given their standard
/// errors; falls back to the plain mean when either error is zero.
fn combine(a: f64, sa: f64, b: f64, sb: f64) -> Measured {
    if sa > 0.0 && sb > 0.0 {
        let (wa, wb) = (1.0 / (sa * sa), 1.0 / (sb * sb));
        Measured::new((wa * a + wb * b) / (wa + wb), (1.0 / (wa + wb)).sqrt())
    } else {
        Measured::new(0.5 * (a + b), 0.5 * (sa * sa + sb * sb).sqrt())
    }
}

/// Merges the signal-in-EOSI and idler-in-EOSI results (in either order).
///
/// Terms in `dw1` come from the signal configuration, terms in `dw2` from the
/// idler configuration, and terms measured by both (the cross terms) are
/// combined by inverse-variance weighting of their standard errors. The
/// modulus is the square root of the averaged JSI estimates.
pub fn merge_configurations(
    a: &ConfigurationResult,
    b: &ConfigurationResult,
) -> Result<MergedState, ReconstructError> {
    let (sig, idl) = match (a.report.configuration, b.report.configuration) {
        (Configuration::SignalInEosi, Configuration::IdlerInEosi) => (a, b),
        (Configuration::IdlerInEosi, Configuration::SignalInEosi) => (b, a),
        _ => return Err(ReconstructError::ConfigurationPair),
    };
    if !(sig.grid1.approx_eq(&idl.grid1) && sig.grid2.approx_eq(&idl.grid2)) {
        return Err(ReconstructError::GridMismatch);
    }
    if sig.jsi.dim() != idl.jsi.dim() {
        return Err(ReconstructError::GridMismatch);
    }

    let mut coefficients = BTreeMap::new();
    let mut inconsistent = false;
    for term in Term::ALL {
        let measured = match (sig.report.get(term), idl.report.get(term)) {
            (Some(x), Some(y)) => {
                let m = combine(x.mean, x.sem(), y.mean, y.sem());
                if term == Term::Phi11 {
                    let diff = (x.mean - y.mean).abs();
                    let bound = 3.0 * (x.sem().powi(2) + y.sem().powi(2)).sqrt();
                    inconsistent = if bound > 0.0 {
                        diff > bound
                    } else {
                        diff > 1e-6 * x.mean.abs().max(y.mean.abs())
                    };
                }
                m
            }
            (Some(x), None) | (None, Some(x)) => Measured::new(x.mean, x.sem()),
            (None, None) => continue,
        };
        coefficients.insert(term, measured);
    }

    let means: Coefficients = coefficients.iter().map(|(t, m)| (*t, m.value)).collect();
    let jsi = merged_jsi(&sig.jsi, &idl.jsi);
    let state = assemble_state(&jsi, &means, &sig.grid1, &sig.grid2)?;
    Ok(MergedState {
        state,
        coefficients,
        inconsistent,
    })
}
