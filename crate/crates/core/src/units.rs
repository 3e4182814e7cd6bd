//! Wavelength / angular-frequency conversions.

use std::f64::consts::TAU;

/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT: f64 = 299.792458;

/// Ratio between the full width at half maximum and the standard deviation of
/// a Gaussian, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Angular frequency (rad/fs) of light with the given vacuum wavelength (nm).
pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / wavelength_nm
}

/// Vacuum wavelength (nm) of light with the given angular frequency (rad/fs).
pub fn wavelength(angular_frequency: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / angular_frequency
}

/// Converts a wavelength interval around `center_nm` into an angular frequency
/// interval using the first-order derivative of `2 pi c / lambda`.
pub fn angular_bandwidth(width_nm: f64, center_nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT * width_nm / (center_nm * center_nm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trip() {
        let w = angular_frequency(830.0);
        assert_relative_eq!(w, 2.269_459_72, max_relative = 1e-6);
        assert_relative_eq!(wavelength(w), 830.0, max_relative = 1e-14);
    }

    #[test]
    fn bandwidth_matches_finite_difference() {
        let exact = angular_frequency(829.99) - angular_frequency(830.01);
        assert_relative_eq!(angular_bandwidth(0.02, 830.0), exact, max_relative = 1e-8);
    }
}
