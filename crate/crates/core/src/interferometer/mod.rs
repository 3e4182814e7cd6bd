//! Forward model of the electro-optic spectral shearing interferometer.
//!
//! One photon (the "sheared" photon) passes through a Mach-Zehnder whose arms
//! apply a spectral shear `Omega` and a delay `tau`; the other photon is
//! resolved spectrally and heralds. At one output port the coincidence
//! pattern is
//!
//! ```text
//! S_Omega(w, w_h) = 1/4 { S(w, w_h) + S(w + Omega, w_h)
//!                         + 2 Re[ f(w, w_h) f*(w + Omega, w_h) exp(i (dw tau + theta)) ] }
//! ```
//!
//! where `theta` is the (drifting) global fringe phase and `dw` the detuning
//! of the sheared photon from its grid centre. Patterns are always oriented
//! `[sheared, herald]`, whichever photon is sheared.

mod simulate;

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{BiphotonState, FrequencyGrid, Photon};
use crate::units::{angular_bandwidth, angular_frequency, wavelength, FWHM_PER_SIGMA};

pub use simulate::{
    histogram, simulate_events, EventRecord, EventStream, Interferogram, StreamHeader,
    MIN_SUBSET_SIZE,
};

/// The delay must exceed this many transform-limited temporal FWHMs of the
/// sheared photon for the sidebands to separate from the baseband.
pub const SIDEBAND_SEPARATION: f64 = 4.0;

/// Relative tolerance on `Omega / step` being an integer.
pub const SHEAR_ALIGNMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InterferometerError {
    #[error(
        "shear-misaligned: shear {shear} rad/fs is not a non-negative integer multiple of the sheared grid step {step} rad/fs"
    )]
    ShearMisaligned { shear: f64, step: f64 },
    #[error("shear-positive: the shear must be at least one grid step, got {0} rad/fs")]
    ZeroShear(f64),
    #[error("delay-nonzero: the interferometer delay must be non-zero")]
    ZeroDelay,
    #[error(
        "sideband-separation: |delay| = {delay} fs must exceed 4 x the temporal FWHM of the sheared photon ({required} fs)"
    )]
    SidebandOverlap { delay: f64, required: f64 },
    #[error(
        "sideband-nyquist: 1.5 |delay| = {extent} fs exceeds the time range {limit} fs resolvable on the sheared grid"
    )]
    DelayAboveNyquist { extent: f64, limit: f64 },
    #[error("duration-positive: acquisition duration must be > 0 s, got {0}")]
    NonPositiveDuration(f64),
    #[error("acceptance-window-empty: no grid bins fall inside the detector spectral range")]
    EmptyAcceptanceWindow,
    #[error("pattern-nonzero: the detected pattern integrates to zero")]
    ZeroPattern,
    #[error("detector-invalid: {0}")]
    InvalidDetector(String),
    #[error("drift-invalid: {0}")]
    InvalidDrift(String),
    #[error("subset-size: subsets must hold at least {min} events, got {got}")]
    SubsetTooSmall { got: usize, min: usize },
    #[error("insufficient-events: {available} events cannot fill one subset of {subset_size}")]
    NotEnoughEvents {
        available: usize,
        subset_size: usize,
    },
    #[error("event-stream-invalid: {0}")]
    InvalidStream(String),
}

/// Which photon is sent through the interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    SignalInEosi,
    IdlerInEosi,
}

impl Configuration {
    pub fn sheared_photon(self) -> Photon {
        match self {
            Configuration::SignalInEosi => Photon::Signal,
            Configuration::IdlerInEosi => Photon::Idler,
        }
    }

    pub fn from_sheared(photon: Photon) -> Self {
        match photon {
            Photon::Signal => Configuration::SignalInEosi,
            Photon::Idler => Configuration::IdlerInEosi,
        }
    }

    /// Numeric tag used in the binary event log.
    pub fn tag(self) -> u32 {
        match self {
            Configuration::SignalInEosi => 0,
            Configuration::IdlerInEosi => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Configuration::SignalInEosi),
            1 => Some(Configuration::IdlerInEosi),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Configuration::SignalInEosi => "signal-in-eosi",
            Configuration::IdlerInEosi => "idler-in-eosi",
        }
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Interferometer settings. The shear must be a whole number of sheared-grid
/// steps so no interpolation enters the interference term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearSettings {
    pub shear_rad_per_fs: f64,
    pub delay_fs: f64,
    pub sheared_photon: Photon,
}

impl ShearSettings {
    pub fn configuration(&self) -> Configuration {
        Configuration::from_sheared(self.sheared_photon)
    }

    pub fn herald_photon(&self) -> Photon {
        self.sheared_photon.other()
    }

    /// Shear in grid steps, `m = Omega / step`. Zero shear is allowed here.
    pub fn shear_index(&self, sheared_grid: &FrequencyGrid) -> Result<usize, InterferometerError> {
        let ratio = self.shear_rad_per_fs / sheared_grid.step();
        let m = ratio.round();
        let misaligned = InterferometerError::ShearMisaligned {
            shear: self.shear_rad_per_fs,
            step: sheared_grid.step(),
        };
        if !ratio.is_finite()
            || m < 0.0
            || (ratio - m).abs() > SHEAR_ALIGNMENT_TOLERANCE * m.max(1.0)
        {
            return Err(misaligned);
        }
        Ok(m as usize)
    }

    /// Full measurement validation against a state: aligned non-zero shear,
    /// non-zero delay, sideband separation and Nyquist limit. Returns `m`.
    pub fn validate(&self, state: &BiphotonState) -> Result<usize, InterferometerError> {
        let grid = state.grid(self.sheared_photon);
        let m = self.shear_index(grid)?;
        if m == 0 {
            return Err(InterferometerError::ZeroShear(self.shear_rad_per_fs));
        }
        let tau = self.delay_fs;
        if tau == 0.0 || !tau.is_finite() {
            return Err(InterferometerError::ZeroDelay);
        }
        let required = SIDEBAND_SEPARATION * transform_limited_fwhm(state, self.sheared_photon);
        if tau.abs() <= required {
            return Err(InterferometerError::SidebandOverlap {
                delay: tau,
                required,
            });
        }
        let limit = PI / grid.step();
        let extent = 1.5 * tau.abs();
        if extent >= limit {
            return Err(InterferometerError::DelayAboveNyquist { extent, limit });
        }
        Ok(m)
    }
}

/// Temporal intensity FWHM of a transform-limited pulse with the marginal
/// spectrum of `photon`, treating the spectrum as Gaussian with its rms width.
pub fn transform_limited_fwhm(state: &BiphotonState, photon: Photon) -> f64 {
    let marginal = state.marginal(photon);
    let x = state.grid(photon).detunings();
    let total = marginal.sum();
    let mean = (&marginal * &x).sum() / total;
    let var = (&marginal * &x.mapv(|v| (v - mean).powi(2))).sum() / total;
    // amplitude exp(-w^2 / 4 s^2) <-> intensity exp(-2 s^2 t^2)
    FWHM_PER_SIGMA / (2.0 * var.sqrt())
}

/// Detector response. Resolutions are Gaussian FWHMs in nm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub resolution_sheared_nm: f64,
    pub resolution_herald_nm: f64,
    /// Recorded for completeness; the coincidence rate is already net of it.
    pub efficiency: f64,
    pub coincidence_rate_per_s: f64,
    pub spectral_range_nm: (f64, f64),
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            resolution_sheared_nm: 0.05,
            resolution_herald_nm: 0.3,
            efficiency: 0.10,
            coincidence_rate_per_s: 15.0,
            spectral_range_nm: (825.0, 835.0),
        }
    }
}

impl DetectorModel {
    /// No blur and an acceptance window wide enough for any optical grid.
    pub fn ideal(coincidence_rate_per_s: f64) -> Self {
        DetectorModel {
            resolution_sheared_nm: 0.0,
            resolution_herald_nm: 0.0,
            efficiency: 1.0,
            coincidence_rate_per_s,
            spectral_range_nm: (1.0, 1.0e6),
        }
    }

    pub fn validate(&self) -> Result<(), InterferometerError> {
        let bad = |m: String| Err(InterferometerError::InvalidDetector(m));
        if !(self.resolution_sheared_nm >= 0.0 && self.resolution_herald_nm >= 0.0) {
            return bad("resolutions must be >= 0 nm".into());
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!(
                "efficiency must lie in (0, 1], got {}",
                self.efficiency
            ));
        }
        if !(self.coincidence_rate_per_s > 0.0 && self.coincidence_rate_per_s.is_finite()) {
            return bad(format!(
                "coincidence rate must be > 0, got {}",
                self.coincidence_rate_per_s
            ));
        }
        let (lo, hi) = self.spectral_range_nm;
        if !(lo > 0.0 && hi > lo) {
            return bad(format!(
                "spectral range must satisfy 0 < min < max, got ({lo}, {hi})"
            ));
        }
        Ok(())
    }

    fn resolution(&self, sheared: bool) -> f64 {
        if sheared {
            self.resolution_sheared_nm
        } else {
            self.resolution_herald_nm
        }
    }

    fn accepts(&self, omega: f64) -> bool {
        let (lo, hi) = self.spectral_range_nm;
        let w = wavelength(omega);
        w >= lo && w <= hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    None,
    RandomWalk,
}

/// Global fringe phase drift: a Wiener process with `Var theta(t) = D t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModel {
    pub kind: DriftKind,
    pub diffusion_rad2_per_s: f64,
    pub seed: u64,
}

impl Default for DriftModel {
    /// About 2 rad RMS over one hour of acquisition.
    fn default() -> Self {
        DriftModel {
            kind: DriftKind::RandomWalk,
            diffusion_rad2_per_s: 1.1e-3,
            seed: 0,
        }
    }
}

impl DriftModel {
    pub fn none() -> Self {
        DriftModel {
            kind: DriftKind::None,
            diffusion_rad2_per_s: 0.0,
            seed: 0,
        }
    }

    pub fn random_walk(diffusion_rad2_per_s: f64, seed: u64) -> Self {
        DriftModel {
            kind: DriftKind::RandomWalk,
            diffusion_rad2_per_s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), InterferometerError> {
        if !(self.diffusion_rad2_per_s >= 0.0 && self.diffusion_rad2_per_s.is_finite()) {
            return Err(InterferometerError::InvalidDrift(format!(
                "diffusion must be >= 0 rad^2/s, got {}",
                self.diffusion_rad2_per_s
            )));
        }
        Ok(())
    }
}

/// The two parts of the pattern, so that `pattern(theta) = background +
/// Re(interference * exp(i theta))` can be evaluated for any drift phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternComponents {
    pub background: Array2<f64>,
    pub interference: Array2<Complex64>,
    pub sheared_grid: FrequencyGrid,
    pub herald_grid: FrequencyGrid,
}

impl PatternComponents {
    pub fn new(state: &BiphotonState, s: &ShearSettings) -> Result<Self, InterferometerError> {
        let oriented = match s.sheared_photon {
            Photon::Signal => state.clone(),
            Photon::Idler => state.transposed(),
        };
        let sheared_grid = *oriented.grid1();
        let herald_grid = *oriented.grid2();
        let m = s.shear_index(&sheared_grid)?;
        let f = oriented.amplitude();
        let (n, nh) = f.dim();
        let x = sheared_grid.detunings();
        let zero = Complex64::new(0.0, 0.0);
        let mut background = Array2::zeros((n, nh));
        let mut interference = Array2::zeros((n, nh));
        for i in 0..n {
            let carrier = Complex64::from_polar(0.5, x[i] * s.delay_fs);
            for j in 0..nh {
                let a = f[[i, j]];
                let b = if i + m < n { f[[i + m, j]] } else { zero };
                background[[i, j]] = 0.25 * (a.norm_sqr() + b.norm_sqr());
                interference[[i, j]] = a * b.conj() * carrier;
            }
        }
        Ok(PatternComponents {
            background,
            interference,
            sheared_grid,
            herald_grid,
        })
    }

    /// Pattern at fringe phase `theta`, clamped at zero.
    pub fn evaluate(&self, theta: f64) -> Array2<f64> {
        let rot = Complex64::from_polar(1.0, theta);
        let mut out = self.background.clone();
        Zip::from(&mut out)
            .and(&self.interference)
            .for_each(|p, z| *p = (*p + (z * rot).re).max(0.0));
        out
    }

    /// Applies the detector blur and spectral acceptance window.
    pub fn detected(&self, det: &DetectorModel) -> Result<Self, InterferometerError> {
        det.validate()?;
        let mut out = self.clone();
        for (axis, grid, sheared) in [
            (Axis(0), self.sheared_grid, true),
            (Axis(1), self.herald_grid, false),
        ] {
            let kernel = blur_kernel(det.resolution(sheared), &grid);
            out.background = convolve_axis(&out.background, axis, &kernel);
            out.interference = convolve_axis(&out.interference, axis, &kernel);
        }
        let keep1 = window(det, &self.sheared_grid);
        let keep2 = window(det, &self.herald_grid);
        if !keep1.iter().any(|&k| k) || !keep2.iter().any(|&k| k) {
            return Err(InterferometerError::EmptyAcceptanceWindow);
        }
        for ((i, j), v) in out.background.indexed_iter_mut() {
            if !(keep1[i] && keep2[j]) {
                *v = 0.0;
            }
        }
        for ((i, j), v) in out.interference.indexed_iter_mut() {
            if !(keep1[i] && keep2[j]) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }
}

/// Noiseless coincidence pattern `S_Omega` at fringe phase `offset`, oriented
/// `[sheared, herald]`. Only shear alignment is checked, so `Omega = 0` and
/// `tau = 0` are allowed here.
pub fn expected_pattern(
    state: &BiphotonState,
    s: &ShearSettings,
    fringe_phase_offset: f64,
) -> Result<Array2<f64>, InterferometerError> {
    Ok(PatternComponents::new(state, s)?.evaluate(fringe_phase_offset))
}

/// Normalised sampled Gaussian kernel with FWHM `fwhm_nm`, in grid bins.
pub fn blur_kernel(fwhm_nm: f64, grid: &FrequencyGrid) -> Array1<f64> {
    if fwhm_nm <= 0.0 {
        return Array1::from_elem(1, 1.0);
    }
    let sigma_nm = fwhm_nm / FWHM_PER_SIGMA;
    let sigma_bins = angular_bandwidth(sigma_nm, wavelength(grid.center())) / grid.step();
    let half = (4.0 * sigma_bins).ceil().max(1.0) as isize;
    let mut k = Array1::from_shape_fn((2 * half + 1) as usize, |i| {
        let d = (i as isize - half) as f64;
        (-0.5 * d * d / (sigma_bins * sigma_bins)).exp()
    });
    let total = k.sum();
    k /= total;
    k
}

fn convolve_axis<T>(data: &Array2<T>, axis: Axis, kernel: &Array1<f64>) -> Array2<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    if kernel.len() == 1 {
        return data.clone();
    }
    let half = (kernel.len() / 2) as isize;
    let mut out = Array2::from_elem(data.dim(), T::default());
    for (src, mut dst) in data.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        let n = src.len() as isize;
        for i in 0..n {
            let mut acc = T::default();
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as isize - half;
                if j >= 0 && j < n {
                    acc = acc + src[j as usize] * *w;
                }
            }
            dst[i as usize] = acc;
        }
    }
    out
}

fn window(det: &DetectorModel, grid: &FrequencyGrid) -> Vec<bool> {
    (0..grid.count())
        .map(|k| det.accepts(grid.frequency(k)))
        .collect()
}

/// Angular frequency band accepted by a detector, `(w_min, w_max)` in rad/fs.
pub fn acceptance_band(det: &DetectorModel) -> (f64, f64) {
    let (lo, hi) = det.spectral_range_nm;
    (angular_frequency(hi), angular_frequency(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state, SourceConfig};
    use approx::assert_relative_eq;

    fn chirped() -> BiphotonState {
        let cfg = SourceConfig {
            pump_chirp_fs2: -1.6e5,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 256).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 256).unwrap();
        build_state(&cfg, &g1, &g2).unwrap()
    }

    fn settings(state: &BiphotonState, m: f64, tau: f64) -> ShearSettings {
        ShearSettings {
            shear_rad_per_fs: m * state.grid1().step(),
            delay_fs: tau,
            sheared_photon: Photon::Signal,
        }
    }

    #[test]
    fn zero_shear_zero_delay_reproduces_jsi() {
        let s = chirped();
        let p = expected_pattern(&s, &settings(&s, 0.0, 0.0), 0.0).unwrap();
        for (a, b) in p.iter().zip(s.jsi().iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12, epsilon = 1e-300);
        }
        let dark = expected_pattern(&s, &settings(&s, 0.0, 0.0), PI).unwrap();
        let peak = s.jsi().iter().copied().fold(0.0, f64::max);
        assert!(dark.iter().all(|v| *v >= 0.0 && *v < 1e-12 * peak));
    }

    #[test]
    fn fringe_phase_slants_with_herald_frequency() {
        // interference term phase: dphi(x, y) + x tau, with
        // dphi = phi(x) - phi(x + Omega) = -phi_11 Omega y for a pure cross phase
        let s = chirped();
        let set = settings(&s, 8.0, 6000.0);
        let comp = PatternComponents::new(&s, &set).unwrap();
        let x = s.grid1().detunings();
        let y = s.grid2().detunings();
        let omega = set.shear_rad_per_fs;
        for i in [100, 128, 140] {
            for j in [90, 128, 170] {
                let got = comp.interference[[i, j]].arg();
                let want = 1.6e5 * omega * y[j] + x[i] * 6000.0;
                let diff = (got - want).rem_euclid(2.0 * PI);
                assert!(diff.min(2.0 * PI - diff) < 1e-9);
            }
        }
    }

    #[test]
    fn swapping_sheared_photon_transposes_roles() {
        let s = chirped();
        let idler = ShearSettings {
            shear_rad_per_fs: 4.0 * s.grid2().step(),
            delay_fs: 3000.0,
            sheared_photon: Photon::Idler,
        };
        let signal = ShearSettings {
            sheared_photon: Photon::Signal,
            ..idler
        };
        let a = expected_pattern(&s, &idler, 0.3).unwrap();
        let b = expected_pattern(&s.transposed(), &signal, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rules() {
        let s = chirped();
        assert_eq!(settings(&s, 8.0, 6000.0).validate(&s).unwrap(), 8);
        assert!(matches!(
            settings(&s, 8.5, 6000.0).validate(&s),
            Err(InterferometerError::ShearMisaligned { .. })
        ));
        assert!(matches!(
            settings(&s, 8.0, 0.0).validate(&s),
            Err(InterferometerError::ZeroDelay)
        ));
        assert!(matches!(
            settings(&s, 8.0, 500.0).validate(&s),
            Err(InterferometerError::SidebandOverlap { .. })
        ));
        assert!(matches!(
            settings(&s, 8.0, 20000.0).validate(&s),
            Err(InterferometerError::DelayAboveNyquist { .. })
        ));
    }

    #[test]
    fn blur_kernel_is_normalised() {
        let g = chirped();
        let k = blur_kernel(0.3, g.grid1());
        assert!((k.sum() - 1.0).abs() < 1e-12);
        assert_eq!(k.len() % 2, 1);
        let mut delta = Array2::<f64>::zeros((64, 3));
        delta[[32, 1]] = 1.0;
        let out = convolve_axis(&delta, Axis(0), &k);
        assert!((out.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detected_pattern_is_windowed() {
        let s = chirped();
        let det = DetectorModel {
            spectral_range_nm: (829.9, 830.1),
            ..Default::default()
        };
        let comp = PatternComponents::new(&s, &settings(&s, 8.0, 6000.0)).unwrap();
        let d = comp.detected(&det).unwrap();
        let p = d.evaluate(0.0);
        let (wmin, wmax) = acceptance_band(&det);
        for ((i, j), v) in p.indexed_iter() {
            let inside = (wmin..=wmax).contains(&d.sheared_grid.frequency(i))
                && (wmin..=wmax).contains(&d.herald_grid.frequency(j));
            if !inside {
                assert_eq!(*v, 0.0);
            }
        }
        let far = DetectorModel {
            spectral_range_nm: (700.0, 710.0),
            ..Default::default()
        };
        assert!(matches!(
            comp.detected(&far),
            Err(InterferometerError::EmptyAcceptanceWindow)
        ));
    }
}
