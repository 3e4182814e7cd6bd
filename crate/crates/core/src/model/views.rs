//! Joint temporal and hybrid time-frequency views of a JSA.

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::BiphotonState;
use crate::fourier::{centered_transform, conjugate_step, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewKind {
    /// `f~(t1, t2)`: both photons in the time domain.
    JointTemporal,
    /// `f(t1, w2)`: signal in time, idler in frequency.
    HybridTimeFrequency,
    /// `f(w1, t2)`: signal in frequency, idler in time.
    HybridFrequencyTime,
}

impl ViewKind {
    pub const ALL: [ViewKind; 3] = [
        ViewKind::JointTemporal,
        ViewKind::HybridTimeFrequency,
        ViewKind::HybridFrequencyTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::JointTemporal => "joint-temporal",
            ViewKind::HybridTimeFrequency => "hybrid-t1-w2",
            ViewKind::HybridFrequencyTime => "hybrid-w1-t2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisDomain {
    /// Time in fs.
    Time,
    /// Angular frequency detuning in rad/fs.
    Frequency,
}

/// Centred uniform axis: coordinate `(k - count/2) * step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewAxis {
    pub domain: AxisDomain,
    pub step: f64,
    pub count: usize,
}

impl ViewAxis {
    pub fn coordinate(&self, k: usize) -> f64 {
        (k as f64 - (self.count / 2) as f64) * self.step
    }

    pub fn coordinates(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.count, |k| self.coordinate(k))
    }

    pub fn label(&self, index: usize) -> String {
        match (self.domain, index) {
            (AxisDomain::Time, 1) => "t1_fs".into(),
            (AxisDomain::Time, _) => "t2_fs".into(),
            (AxisDomain::Frequency, 1) => "dw1_rad_per_fs".into(),
            (AxisDomain::Frequency, _) => "dw2_rad_per_fs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrequencyView {
    pub kind: ViewKind,
    pub axis1: ViewAxis,
    pub axis2: ViewAxis,
    pub amplitude: Array2<Complex64>,
}

impl TimeFrequencyView {
    pub fn intensity(&self) -> Array2<f64> {
        self.amplitude.mapv(|v| v.norm_sqr())
    }

    /// `sum |g|^2` times the cell area; equals the source state norm.
    pub fn total_intensity(&self) -> f64 {
        self.amplitude.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.axis1.step * self.axis2.step
    }

    /// Slope of the intensity ridge: weighted regression of the centroid along
    /// `axis1` against the `axis2` coordinate. For a hybrid `t1-w2` view of a
    /// chirped state this is the cross phase coefficient.
    pub fn ridge_slope(&self) -> f64 {
        let inten = self.intensity();
        let c1 = self.axis1.coordinates();
        let c2 = self.axis2.coordinates();
        let weights = inten.sum_axis(Axis(0));
        let centroids: Array1<f64> = Array1::from_shape_fn(c2.len(), |j| {
            let col = inten.column(j);
            if weights[j] > 0.0 {
                col.iter().zip(c1.iter()).map(|(w, t)| w * t).sum::<f64>() / weights[j]
            } else {
                0.0
            }
        });
        weighted_slope(&c2, &centroids, &weights)
    }

    /// Pearson correlation between the two coordinates under `|g|^2`.
    pub fn intensity_correlation(&self) -> f64 {
        let inten = self.intensity();
        let c1 = self.axis1.coordinates();
        let c2 = self.axis2.coordinates();
        let total = inten.sum();
        let (mut m1, mut m2) = (0.0, 0.0);
        for ((i, j), w) in inten.indexed_iter() {
            m1 += w * c1[i];
            m2 += w * c2[j];
        }
        m1 /= total;
        m2 /= total;
        let (mut v1, mut v2, mut cov) = (0.0, 0.0, 0.0);
        for ((i, j), w) in inten.indexed_iter() {
            let (a, b) = (c1[i] - m1, c2[j] - m2);
            v1 += w * a * a;
            v2 += w * b * b;
            cov += w * a * b;
        }
        cov / (v1 * v2).sqrt()
    }

    /// Measured coefficient `alpha` of the `exp(i alpha a b)` term: intensity
    /// weighted mean of the discrete mixed phase derivative over cells whose
    /// intensity exceeds 1% of the peak. There is no closed form; this is an
    /// empirical slope.
    pub fn cross_phase_coefficient(&self) -> f64 {
        let a = &self.amplitude;
        let (n1, n2) = a.dim();
        let peak = a.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let area = self.axis1.step * self.axis2.step;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n1 - 1 {
            for j in 0..n2 - 1 {
                let w = a[[i, j]].norm_sqr();
                if w < 0.01 * peak {
                    continue;
                }
                let mixed =
                    (a[[i + 1, j + 1]] * a[[i, j]] * (a[[i + 1, j]] * a[[i, j + 1]]).conj()).arg();
                num += w * mixed / area;
                den += w;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

fn weighted_slope(x: &Array1<f64>, y: &Array1<f64>, w: &Array1<f64>) -> f64 {
    let sw = w.sum();
    let mx = (w * x).sum() / sw;
    let my = (w * y).sum() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for k in 0..x.len() {
        sxy += w[k] * (x[k] - mx) * (y[k] - my);
        sxx += w[k] * (x[k] - mx).powi(2);
    }
    sxy / sxx
}

/// Fourier transforms one or both axes of the state into the time domain.
pub fn to_time_frequency(state: &BiphotonState, kind: ViewKind) -> TimeFrequencyView {
    let mut amplitude = state.amplitude().clone();
    let (g1, g2) = (state.grid1(), state.grid2());
    let freq = |step: f64, count: usize| ViewAxis {
        domain: AxisDomain::Frequency,
        step,
        count,
    };
    let time = |step: f64, count: usize| ViewAxis {
        domain: AxisDomain::Time,
        step: conjugate_step(step, count),
        count,
    };
    let (to1, to2) = match kind {
        ViewKind::JointTemporal => (true, true),
        ViewKind::HybridTimeFrequency => (true, false),
        ViewKind::HybridFrequencyTime => (false, true),
    };
    if to1 {
        centered_transform(&mut amplitude, Axis(0), g1.step(), Direction::ToTime);
    }
    if to2 {
        centered_transform(&mut amplitude, Axis(1), g2.step(), Direction::ToTime);
    }
    let axis1 = if to1 {
        time(g1.step(), g1.count())
    } else {
        freq(g1.step(), g1.count())
    };
    let axis2 = if to2 {
        time(g2.step(), g2.count())
    } else {
        freq(g2.step(), g2.count())
    };
    TimeFrequencyView {
        kind,
        axis1,
        axis2,
        amplitude,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state, Photon, SourceConfig};
    use approx::assert_relative_eq;

    fn state(pump: f64) -> BiphotonState {
        let cfg = SourceConfig {
            pump_chirp_fs2: pump,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 256).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 256).unwrap();
        build_state(&cfg, &g1, &g2).unwrap()
    }

    #[test]
    fn views_preserve_norm() {
        let s = state(-1.6e5);
        for kind in ViewKind::ALL {
            let v = to_time_frequency(&s, kind);
            assert_relative_eq!(v.total_intensity(), 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn hybrid_ridge_follows_pump_chirp() {
        for pump in [-1.6e5, 1.0e5] {
            let v = to_time_frequency(&state(pump), ViewKind::HybridTimeFrequency);
            assert_relative_eq!(v.ridge_slope(), pump, max_relative = 0.02);
        }
    }

    #[test]
    fn separable_state_has_separable_temporal_view() {
        let v = to_time_frequency(&state(0.0), ViewKind::JointTemporal);
        assert!(v.intensity_correlation().abs() < 1e-9);
        let a = &v.amplitude;
        let lhs = a[[120, 130]] * a[[135, 125]];
        let rhs = a[[120, 125]] * a[[135, 130]];
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
    }

    #[test]
    fn pure_cross_phase_leaves_temporal_intensity_uncorrelated() {
        let v = to_time_frequency(&state(-1.6e5), ViewKind::JointTemporal);
        assert!(v.intensity_correlation().abs() < 1e-9);
    }

    #[test]
    fn temporal_correlation_sign_ignores_chirp_sign() {
        // pump chirp split as phi_p/2 on each photon plus phi_p on the cross term
        let corr = |pump: f64| {
            let cfg = SourceConfig {
                pump_chirp_fs2: pump,
                local_chirp1_fs2: pump / 2.0,
                local_chirp2_fs2: pump / 2.0,
                ..Default::default()
            };
            let g1 = cfg.default_grid(Photon::Signal, 512).unwrap();
            let g2 = cfg.default_grid(Photon::Idler, 512).unwrap();
            let s = build_state(&cfg, &g1, &g2).unwrap();
            to_time_frequency(&s, ViewKind::JointTemporal).intensity_correlation()
        };
        let (pos, neg) = (corr(1.6e5), corr(-1.6e5));
        assert!(pos > 0.1);
        assert_relative_eq!(pos, neg, max_relative = 1e-6);
    }

    #[test]
    fn temporal_cross_phase_changes_sign_with_chirp() {
        let pos =
            to_time_frequency(&state(1.6e5), ViewKind::JointTemporal).cross_phase_coefficient();
        let neg =
            to_time_frequency(&state(-1.6e5), ViewKind::JointTemporal).cross_phase_coefficient();
        assert!(pos != 0.0);
        assert_relative_eq!(pos, -neg, max_relative = 1e-6);
    }
}
