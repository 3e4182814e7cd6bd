//! Two-photon joint spectral amplitudes and their entanglement structure.

mod schmidt;
mod views;

use std::f64::consts::PI;
use std::fmt;

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::units::{angular_bandwidth, angular_frequency, FWHM_PER_SIGMA};

pub use schmidt::{
    effective_schmidt_rank, schmidt_decompose, schmidt_values, schmidt_values_real,
    SchmidtSpectrum, RANK_FLOOR,
};
pub use views::{to_time_frequency, AxisDomain, TimeFrequencyView, ViewAxis, ViewKind};

/// Ratio of marginal intensity at the grid edge to its peak above which a grid
/// is considered too narrow for the state.
pub const EDGE_INTENSITY_LIMIT: f64 = 1e-6;

/// Default half-span of a grid in units of the amplitude width `sqrt(2) sigma`
/// of the marginal intensity.
pub const DEFAULT_SPAN_WIDTHS: f64 = 4.0;

/// Tolerance on the L2 norm of a state read back from storage.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("grid-invalid: {0}")]
    InvalidGrid(String),
    #[error("bandwidth-positive: bandwidth must be > 0 nm, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("wavelength-positive: wavelength must be > 0 nm, got {0}")]
    NonPositiveWavelength(f64),
    #[error(
        "grid-too-narrow: {axis} marginal intensity at the grid edge is {edge_ratio:.3e} of its peak (limit 1e-6)"
    )]
    GridTooNarrow { axis: Photon, edge_ratio: f64 },
    #[error(
        "phase-sampling: spectral phase changes by {max_step:.3} rad between samples at the grid edge (limit pi)"
    )]
    PhaseUndersampled { max_step: f64 },
    #[error("shape-mismatch: amplitude is {found:?}, grids are {expected:?}")]
    ShapeMismatch {
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("normalization: state norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("grid-mismatch: states are sampled on different grids")]
    GridMismatch,
    #[error("decomposition-failed: singular value decomposition did not converge")]
    DecompositionFailed,
    #[error("schmidt-spectrum: all Schmidt coefficients are zero")]
    ZeroSpectrum,
}

/// One photon of the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Photon {
    Signal,
    Idler,
}

impl Photon {
    pub fn other(self) -> Photon {
        match self {
            Photon::Signal => Photon::Idler,
            Photon::Idler => Photon::Signal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Photon::Signal => "signal",
            Photon::Idler => "idler",
        }
    }
}

impl fmt::Display for Photon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Uniform angular-frequency grid. Sample `k` sits at detuning
/// `(k - count/2) * step` from `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct FrequencyGrid {
    center: f64,
    step: f64,
    count: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    center: f64,
    step: f64,
    count: usize,
}

impl TryFrom<RawGrid> for FrequencyGrid {
    type Error = ModelError;

    fn try_from(raw: RawGrid) -> Result<Self, Self::Error> {
        FrequencyGrid::new(raw.center, raw.step, raw.count)
    }
}

impl FrequencyGrid {
    /// `step > 0`, `count >= 8` and a power of two.
    pub fn new(center: f64, step: f64, count: usize) -> Result<Self, ModelError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(ModelError::InvalidGrid(format!(
                "step must be > 0, got {step}"
            )));
        }
        if !center.is_finite() {
            return Err(ModelError::InvalidGrid(format!(
                "center must be finite, got {center}"
            )));
        }
        if count < 8 || !count.is_power_of_two() {
            return Err(ModelError::InvalidGrid(format!(
                "count must be a power of two >= 8, got {count}"
            )));
        }
        Ok(FrequencyGrid {
            center,
            step,
            count,
        })
    }

    /// Grid of `count` samples spanning `[-half_span, half_span)` about `center`.
    pub fn spanning(center: f64, half_span: f64, count: usize) -> Result<Self, ModelError> {
        Self::new(center, 2.0 * half_span / count as f64, count)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn detuning(&self, k: usize) -> f64 {
        (k as f64 - (self.count / 2) as f64) * self.step
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.center + self.detuning(k)
    }

    pub fn detunings(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.count, |k| self.detuning(k))
    }

    /// Index of the sample nearest to `detuning`, if it lies on the grid.
    pub fn index_of(&self, detuning: f64) -> Option<usize> {
        let k = (detuning / self.step).round() + (self.count / 2) as f64;
        (k >= 0.0 && k < self.count as f64).then_some(k as usize)
    }

    /// Equality up to floating-point noise in the derived step.
    pub fn approx_eq(&self, other: &FrequencyGrid) -> bool {
        self.count == other.count
            && (self.step - other.step).abs() <= 1e-12 * self.step
            && (self.center - other.center).abs() <= 1e-12 * self.center.abs().max(self.step)
    }
}

/// Spectral envelope of one photon, as a function of detuning from its centre.
pub trait SpectralShape {
    fn amplitude(&self, detuning: f64) -> f64;
}

/// Gaussian envelope whose intensity has standard deviation `sigma` (rad/fs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub sigma: f64,
}

impl Gaussian {
    /// From the full width at half maximum of the intensity, in rad/fs.
    pub fn from_fwhm(fwhm: f64) -> Self {
        Gaussian {
            sigma: fwhm / FWHM_PER_SIGMA,
        }
    }
}

impl SpectralShape for Gaussian {
    fn amplitude(&self, detuning: f64) -> f64 {
        (-detuning * detuning / (4.0 * self.sigma * self.sigma)).exp()
    }
}

/// Photon-pair source parameters. Field names carry their units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub center_wavelength1_nm: f64,
    pub center_wavelength2_nm: f64,
    /// Intensity FWHM of the signal marginal.
    pub fwhm_bandwidth1_nm: f64,
    /// Intensity FWHM of the idler marginal.
    pub fwhm_bandwidth2_nm: f64,
    /// Pump spectral phase coefficient; enters the JSA as `phi_p dw1 dw2`.
    pub pump_chirp_fs2: f64,
    /// Coefficient of `dw1^2` in the signal phase.
    pub local_chirp1_fs2: f64,
    /// Coefficient of `dw2^2` in the idler phase.
    pub local_chirp2_fs2: f64,
    /// Correlated phase from the crystal itself, added to the cross term.
    pub intrinsic_crystal_phase_fs2: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            center_wavelength1_nm: 830.0,
            center_wavelength2_nm: 830.0,
            fwhm_bandwidth1_nm: 2.5,
            fwhm_bandwidth2_nm: 7.5,
            pump_chirp_fs2: 0.0,
            local_chirp1_fs2: 0.0,
            local_chirp2_fs2: 0.0,
            intrinsic_crystal_phase_fs2: 0.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for w in [self.center_wavelength1_nm, self.center_wavelength2_nm] {
            if !(w.is_finite() && w > 0.0) {
                return Err(ModelError::NonPositiveWavelength(w));
            }
        }
        for b in [self.fwhm_bandwidth1_nm, self.fwhm_bandwidth2_nm] {
            if !(b.is_finite() && b > 0.0) {
                return Err(ModelError::NonPositiveBandwidth(b));
            }
        }
        Ok(())
    }

    pub fn center_frequency(&self, photon: Photon) -> f64 {
        angular_frequency(match photon {
            Photon::Signal => self.center_wavelength1_nm,
            Photon::Idler => self.center_wavelength2_nm,
        })
    }

    /// Intensity FWHM in rad/fs.
    pub fn angular_fwhm(&self, photon: Photon) -> f64 {
        match photon {
            Photon::Signal => {
                angular_bandwidth(self.fwhm_bandwidth1_nm, self.center_wavelength1_nm)
            }
            Photon::Idler => angular_bandwidth(self.fwhm_bandwidth2_nm, self.center_wavelength2_nm),
        }
    }

    pub fn shape(&self, photon: Photon) -> Gaussian {
        Gaussian::from_fwhm(self.angular_fwhm(photon))
    }

    /// Total coefficient of the `dw1 dw2` phase term.
    pub fn cross_phase(&self) -> f64 {
        self.pump_chirp_fs2 + self.intrinsic_crystal_phase_fs2
    }

    /// Default grid: `count` samples spanning four amplitude widths each side.
    pub fn default_grid(&self, photon: Photon, count: usize) -> Result<FrequencyGrid, ModelError> {
        let sigma = self.shape(photon).sigma;
        let half = DEFAULT_SPAN_WIDTHS * std::f64::consts::SQRT_2 * sigma;
        FrequencyGrid::spanning(self.center_frequency(photon), half, count)
    }
}

/// Complex joint spectral amplitude `f(w1, w2)` sampled on two grids, rows
/// indexed by the signal grid. Always L2-normalised:
/// `sum |f|^2 dw1 dw2 == 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct BiphotonState {
    grid1: FrequencyGrid,
    grid2: FrequencyGrid,
    amplitude: Array2<Complex64>,
}

#[derive(Deserialize)]
struct RawState {
    grid1: FrequencyGrid,
    grid2: FrequencyGrid,
    amplitude: Array2<Complex64>,
}

impl TryFrom<RawState> for BiphotonState {
    type Error = ModelError;

    fn try_from(raw: RawState) -> Result<Self, Self::Error> {
        BiphotonState::from_normalized(raw.grid1, raw.grid2, raw.amplitude)
    }
}

impl BiphotonState {
    /// Builds a state, rescaling `amplitude` to unit norm.
    pub fn new(
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
        mut amplitude: Array2<Complex64>,
    ) -> Result<Self, ModelError> {
        check_shape(&grid1, &grid2, amplitude.dim())?;
        let norm = norm_squared(&amplitude, grid1.step() * grid2.step()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(ModelError::NotNormalized(norm));
        }
        amplitude.mapv_inplace(|v| v / norm);
        Ok(BiphotonState {
            grid1,
            grid2,
            amplitude,
        })
    }

    /// Accepts an amplitude that is already normalised (to 1e-9), keeping its
    /// bits unchanged.
    pub fn from_normalized(
        grid1: FrequencyGrid,
        grid2: FrequencyGrid,
        amplitude: Array2<Complex64>,
    ) -> Result<Self, ModelError> {
        check_shape(&grid1, &grid2, amplitude.dim())?;
        let norm = norm_squared(&amplitude, grid1.step() * grid2.step());
        if !((norm - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(ModelError::NotNormalized(norm.sqrt()));
        }
        Ok(BiphotonState {
            grid1,
            grid2,
            amplitude,
        })
    }

    pub fn grid1(&self) -> &FrequencyGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &FrequencyGrid {
        &self.grid2
    }

    pub fn grid(&self, photon: Photon) -> &FrequencyGrid {
        match photon {
            Photon::Signal => &self.grid1,
            Photon::Idler => &self.grid2,
        }
    }

    pub fn amplitude(&self) -> &Array2<Complex64> {
        &self.amplitude
    }

    pub fn into_amplitude(self) -> Array2<Complex64> {
        self.amplitude
    }

    pub fn cell_area(&self) -> f64 {
        self.grid1.step() * self.grid2.step()
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(&self.amplitude, self.cell_area())
    }

    /// Joint spectral intensity `|f|^2`.
    pub fn jsi(&self) -> Array2<f64> {
        self.amplitude.mapv(|v| v.norm_sqr())
    }

    /// `Arg f` in (-pi, pi].
    pub fn phase(&self) -> Array2<f64> {
        self.amplitude.mapv(|v| v.arg())
    }

    /// Marginal spectral intensity of one photon (integrated over the other).
    pub fn marginal(&self, photon: Photon) -> Array1<f64> {
        let jsi = self.jsi();
        match photon {
            Photon::Signal => jsi.sum_axis(ndarray::Axis(1)) * self.grid2.step(),
            Photon::Idler => jsi.sum_axis(ndarray::Axis(0)) * self.grid1.step(),
        }
    }

    /// The state with all phase information discarded, `|f|`.
    pub fn modulus(&self) -> BiphotonState {
        BiphotonState {
            grid1: self.grid1,
            grid2: self.grid2,
            amplitude: self.amplitude.mapv(|v| Complex64::new(v.norm(), 0.0)),
        }
    }

    /// The same state with the photon labels exchanged (`f(w2, w1)`).
    pub fn transposed(&self) -> BiphotonState {
        BiphotonState {
            grid1: self.grid2,
            grid2: self.grid1,
            amplitude: self.amplitude.t().to_owned(),
        }
    }

    /// Multiplies the amplitude by `exp(i phase(dw1, dw2))`, detunings taken
    /// relative to the grid centres.
    pub fn with_extra_phase(&self, phase: impl Fn(f64, f64) -> f64) -> BiphotonState {
        let x = self.grid1.detunings();
        let y = self.grid2.detunings();
        let mut amplitude = self.amplitude.clone();
        for ((i, j), v) in amplitude.indexed_iter_mut() {
            *v *= Complex64::from_polar(1.0, phase(x[i], y[j]));
        }
        BiphotonState {
            grid1: self.grid1,
            grid2: self.grid2,
            amplitude,
        }
    }

    /// `<self|other>` with the grid measure.
    pub fn overlap(&self, other: &BiphotonState) -> Result<Complex64, ModelError> {
        if !(self.grid1.approx_eq(&other.grid1) && self.grid2.approx_eq(&other.grid2)) {
            return Err(ModelError::GridMismatch);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        Zip::from(&self.amplitude)
            .and(&other.amplitude)
            .for_each(|a, b| acc += a.conj() * b);
        Ok(acc * self.cell_area())
    }

    /// `|<self|other>|`, insensitive to global phase.
    pub fn fidelity(&self, other: &BiphotonState) -> Result<f64, ModelError> {
        Ok(self.overlap(other)?.norm())
    }
}

fn check_shape(
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
    found: (usize, usize),
) -> Result<(), ModelError> {
    let expected = (grid1.count(), grid2.count());
    if found != expected {
        return Err(ModelError::ShapeMismatch { found, expected });
    }
    Ok(())
}

fn norm_squared(amplitude: &Array2<Complex64>, area: f64) -> f64 {
    amplitude.iter().map(|v| v.norm_sqr()).sum::<f64>() * area
}

/// Builds `f = psi(w1) chi(w2) exp(i [a20 dw1^2 + a02 dw2^2 + a11 dw1 dw2])` with
/// Gaussian marginals from `cfg`. Detunings are measured from the source
/// centre frequencies, so grids need not be centred on them.
pub fn build_state(
    cfg: &SourceConfig,
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
) -> Result<BiphotonState, ModelError> {
    cfg.validate()?;
    build_state_with_shapes(
        cfg,
        &cfg.shape(Photon::Signal),
        &cfg.shape(Photon::Idler),
        grid1,
        grid2,
    )
}

/// [`build_state`] with arbitrary marginal envelopes. The phase coefficients
/// still come from `cfg`.
pub fn build_state_with_shapes(
    cfg: &SourceConfig,
    shape1: &dyn SpectralShape,
    shape2: &dyn SpectralShape,
    grid1: &FrequencyGrid,
    grid2: &FrequencyGrid,
) -> Result<BiphotonState, ModelError> {
    let offset1 = grid1.center() - cfg.center_frequency(Photon::Signal);
    let offset2 = grid2.center() - cfg.center_frequency(Photon::Idler);
    let x = grid1.detunings().mapv(|d| d + offset1);
    let y = grid2.detunings().mapv(|d| d + offset2);

    for (photon, shape, coords) in [(Photon::Signal, shape1, &x), (Photon::Idler, shape2, &y)] {
        let peak = shape.amplitude(0.0).powi(2);
        let first = shape.amplitude(coords[0]).powi(2);
        let last = shape.amplitude(coords[coords.len() - 1]).powi(2);
        let edge_ratio = first.max(last) / peak;
        if !(edge_ratio < EDGE_INTENSITY_LIMIT) {
            return Err(ModelError::GridTooNarrow {
                axis: photon,
                edge_ratio,
            });
        }
    }

    let (a20, a02, a11) = (
        cfg.local_chirp1_fs2,
        cfg.local_chirp2_fs2,
        cfg.cross_phase(),
    );
    let max_step = max_phase_step(&x, &y, grid1.step(), grid2.step(), a20, a02, a11);
    if !(max_step < PI) {
        return Err(ModelError::PhaseUndersampled { max_step });
    }

    let env1 = x.mapv(|d| shape1.amplitude(d));
    let env2 = y.mapv(|d| shape2.amplitude(d));
    let amplitude = Array2::from_shape_fn((grid1.count(), grid2.count()), |(i, j)| {
        let phase = a20 * x[i] * x[i] + a02 * y[j] * y[j] + a11 * x[i] * y[j];
        Complex64::from_polar(env1[i] * env2[j], phase)
    });
    BiphotonState::new(*grid1, *grid2, amplitude)
}

/// Largest phase increment between neighbouring samples of a quadratic phase,
/// which is attained at a grid corner.
fn max_phase_step(
    x: &Array1<f64>,
    y: &Array1<f64>,
    dx: f64,
    dy: f64,
    a20: f64,
    a02: f64,
    a11: f64,
) -> f64 {
    let xmax = x[0].abs().max(x[x.len() - 1].abs());
    let ymax = y[0].abs().max(y[y.len() - 1].abs());
    let along1 = (2.0 * a20.abs() * xmax + a11.abs() * ymax) * dx;
    let along2 = (2.0 * a02.abs() * ymax + a11.abs() * xmax) * dy;
    along1.max(along2)
}
