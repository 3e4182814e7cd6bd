//! Run configuration: one TOML file with explicit units in every field name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::interferometer::{
    simulate_events, Configuration, DetectorModel, DriftModel, EventStream, InterferometerError,
    PatternComponents, ShearSettings, MIN_SUBSET_SIZE,
};
use crate::model::{build_state, BiphotonState, FrequencyGrid, ModelError, Photon, SourceConfig};
use crate::reconstruct::{
    FitDegree, ReconstructOptions, DEFAULT_CONTRAST_THRESHOLD, DEFAULT_SUBSET_SIZE,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config-readable: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config-parse: {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("shear-spec: {configuration}: give at most one of shear_steps and shear_rad_per_fs")]
    ShearSpec { configuration: Configuration },
    #[error("acquisition-invalid: {0}")]
    Acquisition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Interferometer(#[from] InterferometerError),
}

/// Sampling of the two frequency axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Power of two.
    pub signal_points: usize,
    /// Power of two.
    pub idler_points: usize,
    /// Half-width of each grid in units of `sqrt(2) sigma` of that photon's
    /// amplitude marginal.
    pub span_widths: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            signal_points: 256,
            idler_points: 256,
            span_widths: crate::model::DEFAULT_SPAN_WIDTHS,
        }
    }
}

/// Shear and delay of one configuration. The shear is given either in grid
/// steps of the sheared photon (default 8) or in rad/fs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShearSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear_steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear_rad_per_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_fs: Option<f64>,
}

/// Default shear in grid steps (about a third of either marginal's width).
pub const DEFAULT_SHEAR_STEPS: u32 = 8;

/// Default delays: 6000 fs with the signal sheared, 3000 fs with the idler
/// sheared (its coarser grid has a lower Nyquist delay).
pub fn default_delay_fs(configuration: Configuration) -> f64 {
    match configuration {
        Configuration::SignalInEosi => 6000.0,
        Configuration::IdlerInEosi => 3000.0,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShearPlan {
    pub signal_in_eosi: ShearSpec,
    pub idler_in_eosi: ShearSpec,
}

impl ShearPlan {
    pub fn spec(&self, configuration: Configuration) -> &ShearSpec {
        match configuration {
            Configuration::SignalInEosi => &self.signal_in_eosi,
            Configuration::IdlerInEosi => &self.idler_in_eosi,
        }
    }

    fn spec_mut(&mut self, configuration: Configuration) -> &mut ShearSpec {
        match configuration {
            Configuration::SignalInEosi => &mut self.signal_in_eosi,
            Configuration::IdlerInEosi => &mut self.idler_in_eosi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Acquisition {
    /// Simulated acquisition time per configuration.
    pub duration_s: f64,
    /// Events per analysis subset.
    pub subset_size: usize,
    /// Gate on fringe visibility (fraction of the full-visibility contrast).
    pub contrast_threshold: f64,
    pub seed: u64,
    pub fit_degree: FitDegree,
}

impl Default for Acquisition {
    fn default() -> Self {
        Acquisition {
            duration_s: 7200.0,
            subset_size: DEFAULT_SUBSET_SIZE,
            contrast_threshold: DEFAULT_CONTRAST_THRESHOLD,
            seed: 0,
            fit_degree: FitDegree::Quadratic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: PathBuf::from("eosi-out"),
        }
    }
}

/// Complete description of a simulated measurement campaign. Every section
/// and field is optional; missing values take the defaults of the owning
/// types (830 nm centres, 2.5/7.5 nm bandwidths, 15 coincidences/s,
/// 0.05/0.3 nm resolutions, 10% efficiency, 5000-event subsets, 20% gate).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub grids: GridSpec,
    pub shear: ShearPlan,
    pub detector: DetectorModel,
    pub drift: DriftModel,
    pub acquisition: Acquisition,
    pub output: OutputSpec,
}

/// The validated physical objects a configuration describes.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedRun {
    pub state: BiphotonState,
    pub signal_settings: ShearSettings,
    pub idler_settings: ShearSettings,
}

impl PreparedRun {
    pub fn settings(&self, configuration: Configuration) -> &ShearSettings {
        match configuration {
            Configuration::SignalInEosi => &self.signal_settings,
            Configuration::IdlerInEosi => &self.idler_settings,
        }
    }
}

/// Output of [`RunConfig::simulate`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRun {
    pub state: BiphotonState,
    pub signal: EventStream,
    pub idler: EventStream,
}

/// Reads and fully validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

/// Parses and validates configuration text; `origin` only labels messages.
pub fn parse_config(text: &str, origin: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.as_ref().to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Runs every cross-field check: source and grid adequacy, shear
    /// alignment, sideband separation and Nyquist limits for both
    /// configurations, detector window overlap, drift and acquisition values.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let prepared = self.prepare()?;
        self.detector.validate()?;
        self.drift.validate()?;
        for configuration in [Configuration::SignalInEosi, Configuration::IdlerInEosi] {
            PatternComponents::new(&prepared.state, prepared.settings(configuration))?
                .detected(&self.detector)?;
        }
        let acq = &self.acquisition;
        if !(acq.duration_s > 0.0 && acq.duration_s.is_finite()) {
            return Err(InterferometerError::NonPositiveDuration(acq.duration_s).into());
        }
        if acq.subset_size < MIN_SUBSET_SIZE {
            return Err(ConfigError::Acquisition(format!(
                "subset_size must be at least {MIN_SUBSET_SIZE}, got {}",
                acq.subset_size
            )));
        }
        if !(acq.contrast_threshold > 0.0 && acq.contrast_threshold < 1.0) {
            return Err(ConfigError::Acquisition(format!(
                "contrast_threshold must lie in (0, 1), got {}",
                acq.contrast_threshold
            )));
        }
        Ok(())
    }

    pub fn grid(&self, photon: Photon) -> Result<FrequencyGrid, ModelError> {
        let count = match photon {
            Photon::Signal => self.grids.signal_points,
            Photon::Idler => self.grids.idler_points,
        };
        if !(self.grids.span_widths > 0.0 && self.grids.span_widths.is_finite()) {
            return Err(ModelError::InvalidGrid(format!(
                "span_widths must be > 0, got {}",
                self.grids.span_widths
            )));
        }
        self.source.validate()?;
        let half =
            self.grids.span_widths * std::f64::consts::SQRT_2 * self.source.shape(photon).sigma;
        FrequencyGrid::spanning(self.source.center_frequency(photon), half, count)
    }

    /// Shear settings of one configuration on the configured grids.
    pub fn settings(&self, configuration: Configuration) -> Result<ShearSettings, ConfigError> {
        let spec = self.shear.spec(configuration);
        let photon = configuration.sheared_photon();
        let shear = match (spec.shear_steps, spec.shear_rad_per_fs) {
            (Some(_), Some(_)) => return Err(ConfigError::ShearSpec { configuration }),
            (None, Some(rad)) => rad,
            (steps, None) => {
                steps.unwrap_or(DEFAULT_SHEAR_STEPS) as f64 * self.grid(photon)?.step()
            }
        };
        Ok(ShearSettings {
            shear_rad_per_fs: shear,
            delay_fs: spec
                .delay_fs
                .unwrap_or_else(|| default_delay_fs(configuration)),
            sheared_photon: photon,
        })
    }

    /// Builds the source state and validates both measurement settings.
    pub fn prepare(&self) -> Result<PreparedRun, ConfigError> {
        self.source.validate()?;
        let state = build_state(
            &self.source,
            &self.grid(Photon::Signal)?,
            &self.grid(Photon::Idler)?,
        )?;
        let signal_settings = self.settings(Configuration::SignalInEosi)?;
        let idler_settings = self.settings(Configuration::IdlerInEosi)?;
        signal_settings.validate(&state)?;
        idler_settings.validate(&state)?;
        Ok(PreparedRun {
            state,
            signal_settings,
            idler_settings,
        })
    }

    /// The same configuration with every defaulted shear and delay written
    /// out explicitly.
    pub fn resolved(&self) -> RunConfig {
        let mut out = self.clone();
        for configuration in [Configuration::SignalInEosi, Configuration::IdlerInEosi] {
            let spec = out.shear.spec_mut(configuration);
            if spec.shear_steps.is_none() && spec.shear_rad_per_fs.is_none() {
                spec.shear_steps = Some(DEFAULT_SHEAR_STEPS);
            }
            if spec.delay_fs.is_none() {
                spec.delay_fs = Some(default_delay_fs(configuration));
            }
        }
        out
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.resolved()).expect("configuration types always serialise")
    }

    /// SHA-256 (hex) of the resolved configuration with the output section
    /// cleared, so the digest identifies the physics and the seed only.
    pub fn digest(&self) -> String {
        let mut canonical = self.resolved();
        canonical.output = OutputSpec::default();
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn reconstruct_options(&self) -> ReconstructOptions {
        ReconstructOptions {
            subset_size: self.acquisition.subset_size,
            contrast_threshold: self.acquisition.contrast_threshold,
            degree: self.acquisition.fit_degree,
        }
    }

    /// Simulates both configurations. Arrival/position and drift random
    /// streams are derived per configuration from the acquisition seed (and
    /// the drift seed), so the two configurations are independent.
    pub fn simulate(&self) -> Result<SimulationRun, ConfigError> {
        self.validate()?;
        let prepared = self.prepare()?;
        let digest = self.digest();
        let run = |configuration: Configuration| -> Result<EventStream, ConfigError> {
            let drift = DriftModel {
                seed: derive_seed(
                    self.acquisition.seed,
                    self.drift.seed,
                    "drift",
                    configuration,
                ),
                ..self.drift.clone()
            };
            let mut stream = simulate_events(
                &prepared.state,
                prepared.settings(configuration),
                &self.detector,
                &drift,
                self.acquisition.duration_s,
                derive_seed(self.acquisition.seed, 0, "events", configuration),
            )?;
            stream.header.config_digest = digest.clone();
            Ok(stream)
        };
        Ok(SimulationRun {
            signal: run(Configuration::SignalInEosi)?,
            idler: run(Configuration::IdlerInEosi)?,
            state: prepared.state,
        })
    }
}

/// Independent 64-bit seed for one random stream of one configuration.
pub fn derive_seed(seed: u64, salt: u64, stream: &str, configuration: Configuration) -> u64 {
    let text = format!("{seed}:{salt}:{stream}:{}", configuration.as_str());
    let hash = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(hash[..8].try_into().expect("sha-256 output is 32 bytes"))
}
