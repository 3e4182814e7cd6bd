//! Weighted least-squares estimation of spectral phase coefficients.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{PhaseSurface, ReconstructError};
use crate::interferometer::{Configuration, ShearSettings};

/// Singular values below this fraction of the largest make the design rank
/// deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Polynomial order of the phase model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitDegree {
    #[default]
    Quadratic,
    Cubic,
}

impl FitDegree {
    pub fn as_str(self) -> &'static str {
        match self {
            FitDegree::Quadratic => "quadratic",
            FitDegree::Cubic => "cubic",
        }
    }
}

/// Coefficient of `dw1^p dw2^q` in the source-state phase, in fs^(p+q).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Phi10,
    Phi01,
    Phi20,
    Phi11,
    Phi02,
    Phi30,
    Phi21,
    Phi12,
    Phi03,
}

impl Term {
    pub const ALL: [Term; 9] = [
        Term::Phi10,
        Term::Phi01,
        Term::Phi20,
        Term::Phi11,
        Term::Phi02,
        Term::Phi30,
        Term::Phi21,
        Term::Phi12,
        Term::Phi03,
    ];

    /// Powers `(p, q)` of `dw1` and `dw2`.
    pub fn powers(self) -> (i32, i32) {
        match self {
            Term::Phi10 => (1, 0),
            Term::Phi01 => (0, 1),
            Term::Phi20 => (2, 0),
            Term::Phi11 => (1, 1),
            Term::Phi02 => (0, 2),
            Term::Phi30 => (3, 0),
            Term::Phi21 => (2, 1),
            Term::Phi12 => (1, 2),
            Term::Phi03 => (0, 3),
        }
    }

    fn from_powers(p: i32, q: i32) -> Term {
        *Term::ALL
            .iter()
            .find(|t| t.powers() == (p, q))
            .expect("supported powers")
    }

    pub fn name(self) -> &'static str {
        match self {
            Term::Phi10 => "phi10",
            Term::Phi01 => "phi01",
            Term::Phi20 => "phi20",
            Term::Phi11 => "phi11",
            Term::Phi02 => "phi02",
            Term::Phi30 => "phi30",
            Term::Phi21 => "phi21",
            Term::Phi12 => "phi12",
            Term::Phi03 => "phi03",
        }
    }

    /// Unit of the coefficient.
    pub fn unit(self) -> &'static str {
        let (p, q) = self.powers();
        match p + q {
            1 => "fs",
            2 => "fs2",
            _ => "fs3",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Phase coefficients of one fit.
pub type Coefficients = BTreeMap<Term, f64>;

/// Sample statistics of a quantity over subsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero for one sample.
    pub std: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let count = samples.len();
        if count == 0 {
            return Estimate {
                mean: f64::NAN,
                std: f64::NAN,
                count,
            };
        }
        let mean = samples.iter().sum::<f64>() / count as f64;
        let std = if count < 2 {
            0.0
        } else {
            (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        };
        Estimate { mean, std, count }
    }

    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            std: 0.0,
            count: 1,
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.std / (self.count as f64).sqrt()
        }
    }
}

/// Per-configuration fit summary. Coefficients are labelled in source-state
/// coordinates (`dw1` signal, `dw2` idler) whichever photon was sheared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub configuration: Configuration,
    pub degree: FitDegree,
    pub estimates: BTreeMap<Term, Estimate>,
    /// Coefficients of each accepted subset, in acquisition order.
    pub samples: Vec<Coefficients>,
    pub n_subsets_used: usize,
    pub n_subsets_rejected: usize,
}

impl FitReport {
    pub fn get(&self, term: Term) -> Option<&Estimate> {
        self.estimates.get(&term)
    }

    pub fn phi11(&self) -> Estimate {
        self.estimates[&Term::Phi11]
    }

    /// Builds the report from per-subset coefficients.
    pub fn from_samples(
        configuration: Configuration,
        degree: FitDegree,
        samples: Vec<Coefficients>,
        n_subsets_rejected: usize,
    ) -> Self {
        let mut estimates = BTreeMap::new();
        if let Some(first) = samples.first() {
            for term in first.keys() {
                let values: Vec<f64> = samples.iter().map(|c| c[term]).collect();
                estimates.insert(*term, Estimate::from_samples(&values));
            }
        }
        FitReport {
            configuration,
            degree,
            estimates,
            n_subsets_used: samples.len(),
            samples,
            n_subsets_rejected,
        }
    }
}

/// Powers `(a, b)` of the sheared and herald detunings fitted for `degree`.
/// Pure herald terms are absent: they are absorbed by the per-row offsets.
fn design_powers(degree: FitDegree) -> &'static [(i32, i32)] {
    match degree {
        FitDegree::Quadratic => &[(1, 0), (2, 0), (1, 1)],
        FitDegree::Cubic => &[(1, 0), (2, 0), (1, 1), (3, 0), (2, 1), (1, 2)],
    }
}

/// Fits `phi = g(herald) + sum c_ab x^a y^b` to a concatenated phase surface by
/// weighted least squares (weights: the non-interferometric intensity). The
/// unknown `g` is a free offset per row, eliminated by removing each row's
/// weighted mean. `x` is the sheared and `y` the herald detuning.
pub fn fit_surface(
    phi: &PhaseSurface,
    configuration: Configuration,
    degree: FitDegree,
) -> Result<Coefficients, ReconstructError> {
    let powers = design_powers(degree);
    let x = phi.sheared_grid.detunings();
    let y = phi.herald_grid.detunings();
    let (n, nh) = phi.values.dim();

    let mut xs_max: f64 = 0.0;
    let mut ys_max: f64 = 0.0;
    for ((i, j), &m) in phi.mask.indexed_iter() {
        if m {
            xs_max = xs_max.max(x[i].abs());
            ys_max = ys_max.max(y[j].abs());
        }
    }
    if xs_max == 0.0 || ys_max == 0.0 {
        return Err(ReconstructError::RankDeficient);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for j in 0..nh {
        let idx: Vec<usize> = (0..n)
            .filter(|&i| phi.mask[[i, j]] && phi.weights[[i, j]] > 0.0)
            .collect();
        if idx.len() < 2 {
            continue;
        }
        let v = y[j] / ys_max;
        let w: Vec<f64> = idx.iter().map(|&i| phi.weights[[i, j]]).collect();
        let wsum: f64 = w.iter().sum();
        let regress: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                let u = x[i] / xs_max;
                powers.iter().map(|&(a, b)| u.powi(a) * v.powi(b)).collect()
            })
            .collect();
        let means: Vec<f64> = (0..powers.len())
            .map(|c| regress.iter().zip(&w).map(|(r, wk)| r[c] * wk).sum::<f64>() / wsum)
            .collect();
        let phase_mean = idx
            .iter()
            .zip(&w)
            .map(|(&i, wk)| phi.values[[i, j]] * wk)
            .sum::<f64>()
            / wsum;
        for (k, &i) in idx.iter().enumerate() {
            let sw = w[k].sqrt();
            rows.push(
                (0..powers.len())
                    .map(|c| (regress[k][c] - means[c]) * sw)
                    .collect(),
            );
            rhs.push((phi.values[[i, j]] - phase_mean) * sw);
        }
    }
    if rows.len() < powers.len() {
        return Err(ReconstructError::RankDeficient);
    }
    let a = DMatrix::from_fn(rows.len(), powers.len(), |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0 && smin > RANK_TOLERANCE * smax) {
        return Err(ReconstructError::RankDeficient);
    }
    let sol = svd.solve(&b, 0.0).expect("U and V were computed");

    let mut out = Coefficients::new();
    for (c, &(a, b)) in powers.iter().enumerate() {
        let value = sol[c] / (xs_max.powi(a) * ys_max.powi(b));
        let (p, q) = match configuration {
            Configuration::SignalInEosi => (a, b),
            Configuration::IdlerInEosi => (b, a),
        };
        out.insert(Term::from_powers(p, q), value);
    }
    Ok(out)
}

/// Fits every surface and aggregates to mean and standard deviation.
pub fn fit_coefficients(
    surfaces: &[PhaseSurface],
    s: &ShearSettings,
    degree: FitDegree,
) -> Result<FitReport, ReconstructError> {
    if surfaces.is_empty() {
        return Err(ReconstructError::NoAcceptedSubsets { rejected: 0 });
    }
    let configuration = s.configuration();
    let samples = surfaces
        .iter()
        .map(|phi| fit_surface(phi, configuration, degree))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FitReport::from_samples(configuration, degree, samples, 0))
}
