//! Randomised invariants of the model, the gate and the event-log format.

use std::sync::OnceLock;

use eosi_core::interferometer::{histogram, simulate_events, DetectorModel, DriftModel};
use eosi_core::io::{decode_events, encode_events, RunConfig};
use eosi_core::model::{
    build_state, effective_schmidt_rank, schmidt_decompose, schmidt_values, BiphotonState, Photon,
    SourceConfig,
};
use eosi_core::reconstruct::{
    extract_sideband, gate_subsets, ReconstructError, SidebandExtraction,
};
use proptest::prelude::*;

fn state(pump: f64, n: usize) -> BiphotonState {
    let cfg = SourceConfig {
        pump_chirp_fs2: pump,
        ..Default::default()
    };
    let g1 = cfg.default_grid(Photon::Signal, n).unwrap();
    let g2 = cfg.default_grid(Photon::Idler, n).unwrap();
    build_state(&cfg, &g1, &g2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schmidt_decomposition_reassembles_the_state(pump in -1.6e5..1.6e5_f64) {
        let s = state(pump, 128);
        let back = schmidt_decompose(&s).unwrap().reconstruct();
        let err: f64 = back.iter().zip(s.amplitude()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let norm: f64 = s.amplitude().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!(err / norm < 1e-20);
        let lambda = schmidt_values(&s).unwrap();
        prop_assert!((lambda.iter().map(|l| l * l).sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(lambda.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn separable_phase_leaves_schmidt_values_unchanged(
        pump in -8.0e4..8.0e4_f64,
        a in -2.0e3..2.0e3_f64,
        b in -5.0e4..5.0e4_f64,
        c in -5.0e4..5.0e4_f64,
    ) {
        let s = state(pump, 64);
        let t = s.with_extra_phase(|x, y| a * (x - y) + b * x * x + c * y * y * y / 0.02);
        let (l0, l1) = (schmidt_values(&s).unwrap(), schmidt_values(&t).unwrap());
        for (u, v) in l0.iter().zip(&l1) {
            prop_assert!((u - v).abs() < 1e-9);
        }
        prop_assert!(effective_schmidt_rank(&l0).unwrap() >= 1.0);
    }

    #[test]
    fn event_log_round_trips(seed in any::<u64>(), pump in -4.0e4..4.0e4_f64) {
        let cfg = RunConfig { source: SourceConfig { pump_chirp_fs2: pump, ..Default::default() }, ..Default::default() };
        let run = cfg.prepare().unwrap();
        let stream = simulate_events(
            &run.state,
            &run.signal_settings,
            &DetectorModel::default(),
            &DriftModel::default(),
            2.0,
            seed,
        )
        .unwrap();
        let bytes = encode_events(&stream);
        prop_assert_eq!(decode_events(&bytes).unwrap(), stream);
    }
}

/// Sideband extractions of a quarter-hour default acquisition, split into
/// small subsets so their visibilities spread over the gate's range.
fn subsets() -> &'static [SidebandExtraction] {
    static CELL: OnceLock<Vec<SidebandExtraction>> = OnceLock::new();
    CELL.get_or_init(|| {
        let run = RunConfig::default().prepare().unwrap();
        let stream = simulate_events(
            &run.state,
            &run.signal_settings,
            &DetectorModel::default(),
            &DriftModel::default(),
            900.0,
            7,
        )
        .unwrap();
        histogram(&stream, 2000)
            .unwrap()
            .iter()
            .filter_map(|g| extract_sideband(g).ok())
            .collect()
    })
}

fn accepted(threshold: f64) -> usize {
    match gate_subsets(subsets().to_vec(), threshold) {
        Ok(outcome) => outcome.accepted.len(),
        Err(ReconstructError::NoAcceptedSubsets { .. }) => 0,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn raising_the_gate_never_admits_more_subsets(t1 in 0.05..0.95_f64, t2 in 0.05..0.95_f64) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(accepted(hi) <= accepted(lo));
    }
}
