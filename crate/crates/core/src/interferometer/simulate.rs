//! Monte-Carlo coincidence streams and their binning into interferograms.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Configuration, DetectorModel, DriftKind, DriftModel, InterferometerError, PatternComponents,
    ShearSettings,
};
use crate::model::{BiphotonState, FrequencyGrid};

/// Smallest subset [`histogram`] accepts.
pub const MIN_SUBSET_SIZE: usize = 100;

/// One detected coincidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Bin on the sheared photon's grid.
    pub bin1: u32,
    /// Bin on the heralding photon's grid.
    pub bin2: u32,
    /// Seconds since the start of the acquisition.
    pub timestamp: f64,
    pub config: Configuration,
}

/// Everything needed to interpret a stream without the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    /// SHA-256 of the canonical run configuration, empty when unknown.
    pub config_digest: String,
    pub settings: ShearSettings,
    pub sheared_grid: FrequencyGrid,
    pub herald_grid: FrequencyGrid,
    pub duration_s: f64,
}

impl StreamHeader {
    pub fn configuration(&self) -> Configuration {
        self.settings.configuration()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub events: Vec<EventRecord>,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks strictly increasing timestamps, in-range bins and a consistent
    /// configuration tag.
    pub fn validate(&self) -> Result<(), InterferometerError> {
        let bad = |m: String| Err(InterferometerError::InvalidStream(m));
        let n1 = self.header.sheared_grid.count() as u32;
        let n2 = self.header.herald_grid.count() as u32;
        let config = self.header.configuration();
        let mut last = f64::NEG_INFINITY;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.timestamp > last) {
                return bad(format!("timestamp of record {k} does not increase"));
            }
            if e.bin1 >= n1 || e.bin2 >= n2 {
                return bad(format!(
                    "record {k} has bins ({}, {}) outside {n1}x{n2}",
                    e.bin1, e.bin2
                ));
            }
            if e.config != config {
                return bad(format!(
                    "record {k} is tagged {}, header says {}",
                    e.config.as_str(),
                    config.as_str()
                ));
            }
            last = e.timestamp;
        }
        Ok(())
    }
}

/// Coincidence histogram over `[sheared bin, herald bin]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interferogram {
    counts: Array2<u32>,
    settings: ShearSettings,
    sheared_grid: FrequencyGrid,
    herald_grid: FrequencyGrid,
    total_events: u64,
}

impl Interferogram {
    pub fn new(
        counts: Array2<u32>,
        settings: ShearSettings,
        sheared_grid: FrequencyGrid,
        herald_grid: FrequencyGrid,
    ) -> Result<Self, InterferometerError> {
        if counts.dim() != (sheared_grid.count(), herald_grid.count()) {
            return Err(InterferometerError::InvalidStream(format!(
                "histogram shape {:?} does not match the grids",
                counts.dim()
            )));
        }
        let total_events = counts.iter().map(|&c| c as u64).sum();
        Ok(Interferogram {
            counts,
            settings,
            sheared_grid,
            herald_grid,
            total_events,
        })
    }

    /// Bins `events` (already known to lie on the grids of `header`).
    pub fn from_events(header: &StreamHeader, events: &[EventRecord]) -> Self {
        let mut counts = Array2::zeros((header.sheared_grid.count(), header.herald_grid.count()));
        for e in events {
            counts[[e.bin1 as usize, e.bin2 as usize]] += 1;
        }
        Interferogram {
            counts,
            settings: header.settings,
            sheared_grid: header.sheared_grid,
            herald_grid: header.herald_grid,
            total_events: events.len() as u64,
        }
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn settings(&self) -> &ShearSettings {
        &self.settings
    }

    pub fn sheared_grid(&self) -> &FrequencyGrid {
        &self.sheared_grid
    }

    pub fn herald_grid(&self) -> &FrequencyGrid {
        &self.herald_grid
    }

    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    /// Sums two histograms taken with the same settings.
    pub fn pooled<'a>(grams: impl IntoIterator<Item = &'a Interferogram>) -> Option<Interferogram> {
        let mut iter = grams.into_iter();
        let mut acc = iter.next()?.clone();
        for g in iter {
            acc.counts += &g.counts;
            acc.total_events += g.total_events;
        }
        Some(acc)
    }
}

/// Draws a timestamped coincidence stream.
///
/// Arrivals are a Poisson process at the detector's coincidence rate. Each
/// event's position is drawn from the blurred, windowed pattern evaluated at
/// the drift phase of its timestamp, by rejection against the envelope
/// `background + |interference|`. Arrival times and positions use `seed`; the
/// drift path uses `drift.seed`.
pub fn simulate_events(
    state: &BiphotonState,
    s: &ShearSettings,
    det: &DetectorModel,
    drift: &DriftModel,
    duration_s: f64,
    seed: u64,
) -> Result<EventStream, InterferometerError> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(InterferometerError::NonPositiveDuration(duration_s));
    }
    s.validate(state)?;
    drift.validate()?;
    let comp = PatternComponents::new(state, s)?.detected(det)?;
    let nh = comp.herald_grid.count();

    let envelope: Vec<f64> = comp
        .background
        .iter()
        .zip(comp.interference.iter())
        .map(|(b, z)| b + z.norm())
        .collect();
    if !envelope.iter().any(|&e| e > 0.0) {
        return Err(InterferometerError::ZeroPattern);
    }
    let picker = WeightedIndex::new(&envelope).map_err(|_| InterferometerError::ZeroPattern)?;
    let background = comp.background.as_slice().expect("standard layout");
    let interference = comp.interference.as_slice().expect("standard layout");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drift_rng = ChaCha8Rng::seed_from_u64(drift.seed);
    let arrivals = Exp::new(det.coincidence_rate_per_s).expect("validated rate");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut events = Vec::new();
    let mut t = 0.0;
    let mut theta = 0.0;
    loop {
        let dt = arrivals.sample(&mut rng);
        t += dt;
        if t > duration_s {
            break;
        }
        if drift.kind == DriftKind::RandomWalk && drift.diffusion_rad2_per_s > 0.0 {
            let z: f64 = unit.sample(&mut drift_rng);
            theta += z * (drift.diffusion_rad2_per_s * dt).sqrt();
        }
        let rot = num_complex::Complex64::from_polar(1.0, theta);
        let cell = loop {
            let k = picker.sample(&mut rng);
            let p = (background[k] + (interference[k] * rot).re).max(0.0);
            if rng.random::<f64>() * envelope[k] < p {
                break k;
            }
        };
        events.push(EventRecord {
            bin1: (cell / nh) as u32,
            bin2: (cell % nh) as u32,
            timestamp: t,
            config: s.configuration(),
        });
    }

    Ok(EventStream {
        header: StreamHeader {
            config_digest: String::new(),
            settings: *s,
            sheared_grid: comp.sheared_grid,
            herald_grid: comp.herald_grid,
            duration_s,
        },
        events,
    })
}

/// Splits a stream into consecutive disjoint subsets of exactly `subset_size`
/// events and bins each; a final partial subset is dropped.
pub fn histogram(
    events: &EventStream,
    subset_size: usize,
) -> Result<Vec<Interferogram>, InterferometerError> {
    if subset_size < MIN_SUBSET_SIZE {
        return Err(InterferometerError::SubsetTooSmall {
            got: subset_size,
            min: MIN_SUBSET_SIZE,
        });
    }
    if events.len() < subset_size {
        return Err(InterferometerError::NotEnoughEvents {
            available: events.len(),
            subset_size,
        });
    }
    Ok(events
        .events
        .chunks_exact(subset_size)
        .map(|chunk| Interferogram::from_events(&events.header, chunk))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::expected_pattern;
    use crate::model::{build_state, Photon, SourceConfig};

    fn small_state() -> BiphotonState {
        let cfg = SourceConfig {
            pump_chirp_fs2: -2.0e4,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 64).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 64).unwrap();
        build_state(&cfg, &g1, &g2).unwrap()
    }

    fn settings(state: &BiphotonState) -> ShearSettings {
        ShearSettings {
            shear_rad_per_fs: 2.0 * state.grid1().step(),
            delay_fs: 2500.0,
            sheared_photon: Photon::Signal,
        }
    }

    fn stream(n_events: usize) -> EventStream {
        let header = StreamHeader {
            config_digest: String::new(),
            settings: settings(&small_state()),
            sheared_grid: *small_state().grid1(),
            herald_grid: *small_state().grid2(),
            duration_s: 1.0,
        };
        let events = (0..n_events)
            .map(|k| EventRecord {
                bin1: (k % 64) as u32,
                bin2: (k % 7) as u32,
                timestamp: k as f64 * 0.1 + 0.05,
                config: Configuration::SignalInEosi,
            })
            .collect();
        EventStream { header, events }
    }

    #[test]
    fn subsets_drop_the_remainder() {
        assert_eq!(histogram(&stream(15000), 5000).unwrap().len(), 3);
        let grams = histogram(&stream(14999), 5000).unwrap();
        assert_eq!(grams.len(), 2);
        assert!(grams.iter().all(|g| g.total_events() == 5000));
        assert!(grams
            .iter()
            .all(|g| g.counts().iter().map(|&c| c as u64).sum::<u64>() == 5000));
        assert!(matches!(
            histogram(&stream(4999), 5000),
            Err(InterferometerError::NotEnoughEvents { .. })
        ));
        assert!(matches!(
            histogram(&stream(1000), 99),
            Err(InterferometerError::SubsetTooSmall { .. })
        ));
    }

    #[test]
    fn simulation_is_reproducible_and_valid() {
        let s = small_state();
        let det = DetectorModel::default();
        let drift = DriftModel::default();
        let a = simulate_events(&s, &settings(&s), &det, &drift, 60.0, 11).unwrap();
        let b = simulate_events(&s, &settings(&s), &det, &drift, 60.0, 11).unwrap();
        let c = simulate_events(&s, &settings(&s), &det, &drift, 60.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.events, c.events);
        a.validate().unwrap();
        // Poisson(900): well within 5 sigma
        assert!((a.len() as f64 - 900.0).abs() < 150.0);
    }

    #[test]
    fn ideal_detector_histogram_follows_pattern() {
        let s = small_state();
        let set = settings(&s);
        let stream = simulate_events(
            &s,
            &set,
            &DetectorModel::ideal(1000.0),
            &DriftModel::none(),
            200.0,
            3,
        )
        .unwrap();
        let gram = histogram(&stream, stream.len()).unwrap().remove(0);
        let p = expected_pattern(&s, &set, 0.0).unwrap();
        let total = p.sum();
        let n = gram.total_events() as f64;
        let tv: f64 = gram
            .counts()
            .iter()
            .zip(p.iter())
            .map(|(&c, &q)| (c as f64 / n - q / total).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn rejects_non_positive_duration() {
        let s = small_state();
        let r = simulate_events(
            &s,
            &settings(&s),
            &DetectorModel::default(),
            &DriftModel::none(),
            0.0,
            1,
        );
        assert!(matches!(
            r,
            Err(InterferometerError::NonPositiveDuration(_))
        ));
    }
}
