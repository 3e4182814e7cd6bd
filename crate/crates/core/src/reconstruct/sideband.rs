//! Fourier-domain isolation of the interference sideband and contrast gating.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::ReconstructError;
use crate::fourier::{fft_columns, fft_coordinate, ifft_columns};
use crate::interferometer::{expected_pattern, Interferogram, ShearSettings};
use crate::model::{BiphotonState, FrequencyGrid};

/// Contrast of a noiseless full-visibility pattern. A pattern
/// `B (1 + V cos(w tau))` has sideband/baseband amplitude ratio `V / 2`.
pub const CONTRAST_SCALE: f64 = 0.5;

/// For counted data the sideband power is debiased by its expected noise
/// power plus this many standard deviations of it, so that a subset without
/// fringes reads as "no sideband" rather than as a small positive contrast.
pub const NOISE_MARGIN_SIGMAS: f64 = 2.0;

/// Default gate, as a fraction of [`CONTRAST_SCALE`].
pub const DEFAULT_CONTRAST_THRESHOLD: f64 = 0.2;

/// A coincidence pattern ready for sideband analysis, oriented
/// `[sheared, herald]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub values: Array2<f64>,
    pub settings: ShearSettings,
    pub sheared_grid: FrequencyGrid,
    pub herald_grid: FrequencyGrid,
    /// Number of Poisson-distributed events behind `values`, or `None` for a
    /// noiseless pattern. Used to subtract the shot-noise floor from the
    /// contrast.
    pub events: Option<u64>,
}

impl Measurement {
    pub fn from_interferogram(gram: &Interferogram) -> Self {
        Measurement {
            values: gram.counts().mapv(f64::from),
            settings: *gram.settings(),
            sheared_grid: *gram.sheared_grid(),
            herald_grid: *gram.herald_grid(),
            events: Some(gram.total_events()),
        }
    }

    /// The dense expected pattern of `state` at fringe phase `theta`.
    pub fn noiseless(
        state: &BiphotonState,
        settings: &ShearSettings,
        theta: f64,
    ) -> Result<Self, ReconstructError> {
        settings.validate(state)?;
        Ok(Measurement {
            values: expected_pattern(state, settings, theta)?,
            settings: *settings,
            sheared_grid: *state.grid(settings.sheared_photon),
            herald_grid: *state.grid(settings.herald_photon()),
            events: None,
        })
    }
}

/// One isolated sideband.
#[derive(Clone, Debug, PartialEq)]
pub struct SidebandExtraction {
    /// Inverse transform of the `T = +tau` sideband, an estimate of
    /// `1/4 f(w) f*(w + Omega) exp(i (dw tau + theta))`.
    pub filtered_complex: Array2<Complex64>,
    /// Inverse transform of the baseband: the non-interferometric part
    /// `1/4 [S(w) + S(w + Omega)]`.
    pub baseband: Array2<f64>,
    /// Sideband to baseband amplitude ratio (see [`CONTRAST_SCALE`]).
    pub contrast: f64,
    /// Peak of the sideband power, fs.
    pub sideband_location: f64,
    /// Shot-noise variance `E|noise|^2` of `filtered_complex` in each herald
    /// row, known when the measurement holds Poisson counts.
    pub noise_variance: Option<Array1<f64>>,
    pub settings: ShearSettings,
    pub sheared_grid: FrequencyGrid,
    pub herald_grid: FrequencyGrid,
    pub events: Option<u64>,
}

impl SidebandExtraction {
    /// Contrast as a fraction of the full-visibility value.
    pub fn visibility(&self) -> f64 {
        self.contrast / CONTRAST_SCALE
    }
}

/// Fourier transforms each herald row along the sheared axis, keeps the
/// window `|T - tau| < |tau|/2` around the sideband and `|T| < |tau|/2`
/// around the baseband, and transforms both back.
pub fn extract_sideband(gram: &Interferogram) -> Result<SidebandExtraction, ReconstructError> {
    extract_measurement(&Measurement::from_interferogram(gram))
}

/// [`extract_sideband`] for any [`Measurement`].
pub fn extract_measurement(meas: &Measurement) -> Result<SidebandExtraction, ReconstructError> {
    if !meas.values.iter().any(|&v| v != 0.0) {
        return Err(ReconstructError::EmptyMeasurement);
    }
    let tau = meas.settings.delay_fs;
    if tau == 0.0 {
        return Err(ReconstructError::Interferometer(
            crate::interferometer::InterferometerError::ZeroDelay,
        ));
    }
    let n = meas.values.nrows();
    let step = meas.sheared_grid.step();
    let half = tau.abs() / 2.0;
    let coords: Vec<f64> = (0..n).map(|k| fft_coordinate(k, n, step)).collect();
    let in_side: Vec<bool> = coords.iter().map(|t| (t - tau).abs() < half).collect();
    let in_base: Vec<bool> = coords.iter().map(|t| t.abs() < half).collect();

    let spectrum = fft_columns(&meas.values);
    let mut side = Array2::zeros(spectrum.dim());
    let mut base = Array2::zeros(spectrum.dim());
    let mut row_power = vec![0.0; n];
    let (mut p_side, mut p_base) = (0.0, 0.0);
    for ((k, j), v) in spectrum.indexed_iter() {
        let p = v.norm_sqr();
        if in_side[k] {
            side[[k, j]] = *v;
            p_side += p;
            row_power[k] += p;
        } else if in_base[k] {
            base[[k, j]] = *v;
            p_base += p;
        }
    }
    if let Some(events) = meas.events {
        // each Fourier coefficient of Poisson counts carries noise power
        // equal to the counts in its column; summed over columns, `events`
        let floor = events as f64;
        let w_side = in_side.iter().filter(|&&b| b).count() as f64;
        let w_base = in_base.iter().filter(|&&b| b).count() as f64;
        let sigma = side_noise_power_sd(&spectrum, &meas.values, &in_side, &in_base);
        p_side -= w_side * floor + NOISE_MARGIN_SIGMAS * sigma;
        p_base -= w_base * floor;
        for (k, p) in row_power.iter_mut().enumerate() {
            if in_side[k] {
                *p -= floor;
            }
        }
    }
    if !(p_side > 0.0 && p_base > 0.0) {
        return Err(ReconstructError::SidebandNotFound { delay: tau });
    }
    let contrast = (p_side / p_base).sqrt();
    let peak = (0..n)
        .filter(|&k| in_side[k])
        .max_by(|&a, &b| row_power[a].total_cmp(&row_power[b]))
        .expect("sideband window is never empty for a valid delay");

    // counts in column j give every retained coefficient noise power N_j;
    // the inverse transform scales it by W / n^2
    let w_side = in_side.iter().filter(|&&b| b).count() as f64;
    let noise_variance = meas.events.map(|_| {
        meas.values
            .columns()
            .into_iter()
            .map(|c| w_side * c.sum() / (n * n) as f64)
            .collect::<Array1<f64>>()
    });
    let filtered_complex = ifft_columns(&side);
    let baseband = ifft_columns(&base).mapv(|v| v.re);
    Ok(SidebandExtraction {
        filtered_complex,
        baseband,
        contrast,
        sideband_location: coords[peak],
        noise_variance,
        settings: meas.settings,
        sheared_grid: meas.sheared_grid,
        herald_grid: meas.herald_grid,
        events: meas.events,
    })
}

/// Standard deviation of the summed noise power in the sideband window.
///
/// The noise of coefficients `k` and `k'` of one column has covariance
/// `L(k - k')`, the transform of the column's mean profile at their lag, so
/// the window sum has variance `sum_d (W - |d|) |L(d)|^2`. `L` is estimated
/// from the observed baseband coefficients with their own noise power
/// removed; lags outside the baseband carry no mean profile.
fn side_noise_power_sd(
    spectrum: &Array2<Complex64>,
    values: &Array2<f64>,
    in_side: &[bool],
    in_base: &[bool],
) -> f64 {
    let w = in_side.iter().filter(|&&b| b).count();
    let mut var = 0.0;
    for (j, column) in values.columns().into_iter().enumerate() {
        let counts = column.sum();
        var += w as f64 * counts * counts;
        for d in (1..w).filter(|&d| in_base[d]) {
            let power = (spectrum[[d, j]].norm_sqr() - counts).max(0.0);
            var += 2.0 * (w - d) as f64 * power;
        }
    }
    var.sqrt()
}

/// Result of [`gate_subsets`].
#[derive(Clone, Debug)]
pub struct GateOutcome {
    pub accepted: Vec<SidebandExtraction>,
    pub rejected: usize,
}

/// Keeps extractions whose visibility (contrast over [`CONTRAST_SCALE`]) is at
/// least `threshold`.
pub fn gate_subsets(
    extractions: Vec<SidebandExtraction>,
    threshold: f64,
) -> Result<GateOutcome, ReconstructError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ReconstructError::InvalidThreshold(threshold));
    }
    let total = extractions.len();
    let accepted: Vec<_> = extractions
        .into_iter()
        .filter(|e| e.visibility() >= threshold)
        .collect();
    let rejected = total - accepted.len();
    if accepted.is_empty() {
        return Err(ReconstructError::NoAcceptedSubsets { rejected });
    }
    Ok(GateOutcome { accepted, rejected })
}

/// Sum of the basebands of subsets taken with identical settings. Filtering
/// is linear, so this is the baseband of the pooled histogram.
pub fn pooled_baseband(accepted: &[SidebandExtraction]) -> Array2<f64> {
    let mut acc = Array2::zeros(accepted[0].baseband.dim());
    for e in accepted {
        acc += &e.baseband;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state, Photon, SourceConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn state(pump: f64) -> BiphotonState {
        let cfg = SourceConfig {
            pump_chirp_fs2: pump,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 256).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 256).unwrap();
        build_state(&cfg, &g1, &g2).unwrap()
    }

    fn settings(s: &BiphotonState) -> ShearSettings {
        ShearSettings {
            shear_rad_per_fs: 8.0 * s.grid1().step(),
            delay_fs: 6000.0,
            sheared_photon: Photon::Signal,
        }
    }

    #[test]
    fn full_visibility_pattern_has_half_contrast() {
        let s = state(0.0);
        let set = ShearSettings {
            shear_rad_per_fs: 0.0,
            ..settings(&s)
        };
        let meas = Measurement {
            values: expected_pattern(&s, &set, 0.0).unwrap(),
            settings: set,
            sheared_grid: *s.grid1(),
            herald_grid: *s.grid2(),
            events: None,
        };
        let ext = extract_measurement(&meas).unwrap();
        assert_relative_eq!(ext.contrast, CONTRAST_SCALE, max_relative = 1e-6);
    }

    #[test]
    fn sideband_sits_at_the_delay() {
        let s = state(-1.6e5);
        let ext =
            extract_measurement(&Measurement::noiseless(&s, &settings(&s), 0.0).unwrap()).unwrap();
        let dt = crate::fourier::conjugate_step(s.grid1().step(), 256);
        assert!((ext.sideband_location - 6000.0).abs() <= dt);
        assert!(ext.contrast > 0.4 && ext.contrast <= 0.5);
    }

    #[test]
    fn fringe_offset_passes_through() {
        let s = state(-1.6e5);
        let a =
            extract_measurement(&Measurement::noiseless(&s, &settings(&s), 0.0).unwrap()).unwrap();
        let b =
            extract_measurement(&Measurement::noiseless(&s, &settings(&s), PI).unwrap()).unwrap();
        let peak = a
            .filtered_complex
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        for (x, y) in a.filtered_complex.iter().zip(b.filtered_complex.iter()) {
            if x.norm() > 0.05 * peak {
                let d = (y / x).arg().abs();
                assert!((d - PI).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn empty_measurement_is_rejected() {
        let s = state(0.0);
        let mut meas = Measurement::noiseless(&s, &settings(&s), 0.0).unwrap();
        meas.values.fill(0.0);
        assert!(matches!(
            extract_measurement(&meas),
            Err(ReconstructError::EmptyMeasurement)
        ));
    }

    #[test]
    fn gate_filters_by_visibility() {
        let s = state(0.0);
        let ext =
            extract_measurement(&Measurement::noiseless(&s, &settings(&s), 0.0).unwrap()).unwrap();
        let mut low = ext.clone();
        low.contrast = 0.05;
        let out = gate_subsets(vec![ext.clone(), low.clone(), ext.clone()], 0.2).unwrap();
        assert_eq!((out.accepted.len(), out.rejected), (2, 1));
        assert!(matches!(
            gate_subsets(vec![low], 0.2),
            Err(ReconstructError::NoAcceptedSubsets { .. })
        ));
        assert!(gate_subsets(vec![ext], 1.5).is_err());
    }

    #[test]
    fn side_noise_spread_matches_monte_carlo() {
        // fringe-free Poisson rows with a localised mean profile
        use rand::SeedableRng;
        use rand_distr::{Distribution, Poisson};
        let (n, cols) = (128, 16);
        let profile: Vec<f64> = (0..n)
            .map(|i| (-((i as f64 - 64.0) / 6.0).powi(2)).exp())
            .collect();
        let scale = 5000.0 / (cols as f64 * profile.iter().sum::<f64>());
        let coords: Vec<f64> = (0..n)
            .map(|k| crate::fourier::fft_coordinate(k, n, 1.0))
            .collect();
        let dt = crate::fourier::conjugate_step(1.0, n);
        let in_side: Vec<bool> = coords
            .iter()
            .map(|t| (t - 32.0 * dt).abs() < 16.0 * dt)
            .collect();
        let in_base: Vec<bool> = coords.iter().map(|t| t.abs() < 16.0 * dt).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (mut excess, mut predicted) = (Vec::new(), Vec::new());
        for _ in 0..400 {
            let values = Array2::from_shape_fn((n, cols), |(i, _)| {
                let mean = scale * profile[i];
                if mean > 0.0 {
                    Poisson::new(mean).unwrap().sample(&mut rng)
                } else {
                    0.0
                }
            });
            let spectrum = fft_columns(&values);
            let w = in_side.iter().filter(|&&b| b).count() as f64;
            let p: f64 = (0..n)
                .filter(|&k| in_side[k])
                .map(|k| spectrum.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum();
            excess.push(p - w * values.sum());
            predicted.push(side_noise_power_sd(&spectrum, &values, &in_side, &in_base));
        }
        let mean = excess.iter().sum::<f64>() / 400.0;
        let sd = (excess.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 399.0).sqrt();
        let model = predicted.iter().sum::<f64>() / 400.0;
        assert!(
            mean.abs() < 0.2 * sd,
            "noise floor is biased: {mean} vs sd {sd}"
        );
        assert!(
            (sd / model - 1.0).abs() < 0.15,
            "observed sd {sd}, model {model}"
        );
    }
}
