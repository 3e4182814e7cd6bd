//! Shared fixtures for the pipeline benchmarks.

use eosi_core::interferometer::{histogram, simulate_events, EventStream, Interferogram};
use eosi_core::io::{PreparedRun, RunConfig};
use eosi_core::model::SourceConfig;

/// Default run configuration at the given pump chirp (fs^2).
pub fn run_config(pump_chirp_fs2: f64) -> RunConfig {
    RunConfig {
        source: SourceConfig {
            pump_chirp_fs2,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// State and shear settings of [`run_config`].
pub fn prepared(pump_chirp_fs2: f64) -> PreparedRun {
    run_config(pump_chirp_fs2)
        .prepare()
        .expect("default configuration is valid")
}

/// A signal-in-EOSI event stream of `duration_s` seconds with the default
/// detector and drift.
pub fn short_stream(pump_chirp_fs2: f64, duration_s: f64, seed: u64) -> EventStream {
    let cfg = run_config(pump_chirp_fs2);
    let run = prepared(pump_chirp_fs2);
    simulate_events(
        &run.state,
        &run.signal_settings,
        &cfg.detector,
        &cfg.drift,
        duration_s,
        seed,
    )
    .expect("simulation succeeds")
}

/// First subset interferogram of [`short_stream`].
pub fn first_subset(pump_chirp_fs2: f64, subset_size: usize) -> Interferogram {
    let stream = short_stream(pump_chirp_fs2, 600.0, 1);
    histogram(&stream, subset_size)
        .expect("enough events")
        .remove(0)
}
