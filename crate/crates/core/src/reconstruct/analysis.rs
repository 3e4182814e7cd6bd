//! Entanglement analysis of reconstructed states and its uncertainties.

use ndarray::Array2;

use super::{
    assemble_state, merge_configurations, merged_jsi, Coefficients, ConfigurationAnalysis,
    Estimate, Measured, ReconstructError, ReconstructionResult,
};
use crate::model::{
    effective_schmidt_rank, schmidt_values, schmidt_values_real, to_time_frequency, BiphotonState,
    FrequencyGrid, TimeFrequencyView, ViewKind,
};

/// Number of leading Schmidt coefficients reported.
pub const SCHMIDT_REPORT_COUNT: usize = 20;

/// Entanglement summary of a state.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSummary {
    pub schmidt_values: Vec<f64>,
    pub schmidt_sigma: Vec<f64>,
    pub k_full: Measured,
    pub k_modulus: Measured,
    /// Joint temporal and both hybrid views, in [`ViewKind::ALL`] order.
    pub views: Vec<TimeFrequencyView>,
}

/// Summary of a reconstruction: its Schmidt spectrum and ranks with subset
/// uncertainties, plus the three time-frequency views of the merged state.
pub fn analyze(result: &ReconstructionResult) -> AnalysisSummary {
    AnalysisSummary {
        schmidt_values: result.schmidt_values.clone(),
        schmidt_sigma: result.schmidt_sigma.clone(),
        k_full: result.k_full,
        k_modulus: result.k_modulus,
        views: ViewKind::ALL
            .iter()
            .map(|&k| to_time_frequency(&result.jsa, k))
            .collect(),
    }
}

/// Summary of a known state (no uncertainties).
pub fn analyze_state(state: &BiphotonState) -> Result<AnalysisSummary, ReconstructError> {
    let values = schmidt_values(state)?;
    let k_full = effective_schmidt_rank(&values)?;
    let k_modulus = modulus_rank(&state.jsi(), state.cell_area())?;
    let top = leading(&values);
    Ok(AnalysisSummary {
        schmidt_sigma: vec![0.0; top.len()],
        schmidt_values: top,
        k_full: Measured::new(k_full, 0.0),
        k_modulus: Measured::new(k_modulus, 0.0),
        views: ViewKind::ALL
            .iter()
            .map(|&k| to_time_frequency(state, k))
            .collect(),
    })
}

fn leading(values: &[f64]) -> Vec<f64> {
    values.iter().take(SCHMIDT_REPORT_COUNT).copied().collect()
}

/// Effective Schmidt rank of the modulus `sqrt(jsi)`.
fn modulus_rank(jsi: &Array2<f64>, cell_area: f64) -> Result<f64, ReconstructError> {
    let modulus = jsi.mapv(|v| v.max(0.0).sqrt());
    Ok(effective_schmidt_rank(&schmidt_values_real(
        &modulus, cell_area,
    )?)?)
}

/// Merges two configuration analyses and attaches uncertainties.
///
/// * `k_full` and the Schmidt coefficients: standard deviation over
///   per-subset states, each built from one subset's coefficients and the
///   other configuration's mean coefficients.
/// * `k_modulus`: leave-one-subset-out jackknife of the pooled JSI.
pub(super) fn combine(
    a: ConfigurationAnalysis,
    b: ConfigurationAnalysis,
) -> Result<ReconstructionResult, ReconstructError> {
    let merged = merge_configurations(&a.result, &b.result)?;
    let state = merged.state;
    let (grid1, grid2) = (*state.grid1(), *state.grid2());
    let jsi = merged_jsi(&a.result.jsi, &b.result.jsi);

    let values = schmidt_values(&state)?;
    let k_full = effective_schmidt_rank(&values)?;
    let schmidt_top = leading(&values);

    let mut ks = Vec::new();
    let mut spectra: Vec<Vec<f64>> = Vec::new();
    for (own, other) in [(&a, &b), (&b, &a)] {
        let base: Coefficients = other
            .result
            .report
            .estimates
            .iter()
            .map(|(t, e)| (*t, e.mean))
            .collect();
        for sample in &own.result.report.samples {
            let mut coefficients = base.clone();
            coefficients.extend(sample.iter().map(|(t, v)| (*t, *v)));
            let (k, top) = rank_of(&jsi, &coefficients, &grid1, &grid2)?;
            ks.push(k);
            spectra.push(top);
        }
    }
    let k_sigma = Estimate::from_samples(&ks).std;
    let schmidt_sigma = (0..schmidt_top.len())
        .map(|i| {
            let column: Vec<f64> = spectra
                .iter()
                .map(|s| s.get(i).copied().unwrap_or(0.0))
                .collect();
            Estimate::from_samples(&column).std
        })
        .collect();

    let area = grid1.step() * grid2.step();
    let k_modulus = modulus_rank(&jsi, area)?;
    let mut replicates = Vec::new();
    for loo in &a.leave_one_out_jsi {
        replicates.push(modulus_rank(&merged_jsi(loo, &b.result.jsi), area)?);
    }
    for loo in &b.leave_one_out_jsi {
        replicates.push(modulus_rank(&merged_jsi(&a.result.jsi, loo), area)?);
    }
    let k_modulus_sigma = jackknife_sigma(&replicates);

    let (fit_signal, fit_idler) = match a.result.report.configuration {
        crate::interferometer::Configuration::SignalInEosi => (a.result.report, b.result.report),
        crate::interferometer::Configuration::IdlerInEosi => (b.result.report, a.result.report),
    };
    Ok(ReconstructionResult {
        jsa: state,
        fit_signal,
        fit_idler,
        coefficients: merged.coefficients,
        inconsistent: merged.inconsistent,
        schmidt_values: schmidt_top,
        schmidt_sigma,
        k_full: Measured::new(k_full, k_sigma),
        k_modulus: Measured::new(k_modulus, k_modulus_sigma),
    })
}

fn rank_of(
    jsi: &Array2<f64>,
    coefficients: &Coefficients,
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
) -> Result<(f64, Vec<f64>), ReconstructError> {
    let state = assemble_state(jsi, coefficients, grid1, grid2)?;
    let values = schmidt_values(&state)?;
    Ok((effective_schmidt_rank(&values)?, leading(&values)))
}

/// Jackknife standard error from leave-one-out replicates.
fn jackknife_sigma(replicates: &[f64]) -> f64 {
    let n = replicates.len();
    if n < 2 {
        return 0.0;
    }
    let mean = replicates.iter().sum::<f64>() / n as f64;
    let ss: f64 = replicates.iter().map(|v| (v - mean).powi(2)).sum();
    ((n - 1) as f64 / n as f64 * ss).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state, Photon, SourceConfig};
    use approx::assert_relative_eq;

    #[test]
    fn jackknife_of_sample_mean_is_its_standard_error() {
        // leave-one-out means of x reproduce std/sqrt(n)
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let n = x.len() as f64;
        let total: f64 = x.iter().sum();
        let loo: Vec<f64> = x.iter().map(|v| (total - v) / (n - 1.0)).collect();
        assert_relative_eq!(
            jackknife_sigma(&loo),
            Estimate::from_samples(&x).sem(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn summary_of_chirped_state() {
        let cfg = SourceConfig {
            pump_chirp_fs2: -1.6e5,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 128).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 256).unwrap();
        let s = build_state(&cfg, &g1, &g2).unwrap();
        let summary = analyze_state(&s).unwrap();
        assert_eq!(summary.schmidt_values.len(), SCHMIDT_REPORT_COUNT);
        assert!(summary.k_full.value > 7.0);
        assert_relative_eq!(summary.k_modulus.value, 1.0, max_relative = 1e-6);
        assert_eq!(summary.views.len(), 3);
    }
}
