//! Schmidt decomposition of a sampled JSA as a singular value decomposition.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use super::{BiphotonState, ModelError};

/// Schmidt coefficients below `RANK_FLOOR * lambda_1` count as zero in the
/// effective Schmidt rank.
pub const RANK_FLOOR: f64 = 1e-12;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

/// `f(w1, w2) = sum_i lambda_i psi_i(w1) chi_i(w2)` with orthonormal modes
/// under the grid inner products `sum conj(a) b dw`.
#[derive(Clone, Debug)]
pub struct SchmidtSpectrum {
    values: Vec<f64>,
    /// Column `i` is `psi_i` on the signal grid.
    modes1: Array2<Complex64>,
    /// Column `i` is `chi_i` on the idler grid.
    modes2: Array2<Complex64>,
    step1: f64,
    step2: f64,
}

impl SchmidtSpectrum {
    /// Schmidt coefficients, descending. `sum lambda_i^2 == 1` for a normalised state.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn modes1(&self) -> &Array2<Complex64> {
        &self.modes1
    }

    pub fn modes2(&self) -> &Array2<Complex64> {
        &self.modes2
    }

    pub fn effective_rank(&self) -> Result<f64, ModelError> {
        effective_schmidt_rank(&self.values)
    }

    /// `sum_i lambda_i psi_i(w1) chi_i(w2)` on the original grids.
    pub fn reconstruct(&self) -> Array2<Complex64> {
        let (n1, r) = self.modes1.dim();
        let n2 = self.modes2.nrows();
        let mut out = Array2::zeros((n1, n2));
        for i in 0..r {
            let l = self.values[i];
            if l == 0.0 {
                continue;
            }
            for j in 0..n1 {
                let a = self.modes1[[j, i]] * l;
                for k in 0..n2 {
                    out[[j, k]] += a * self.modes2[[k, i]];
                }
            }
        }
        out
    }

    /// Largest deviation of `<mode_a|mode_b>` from the identity, over both
    /// mode families.
    pub fn orthonormality_error(&self) -> f64 {
        let check = |m: &Array2<Complex64>, step: f64| {
            let r = m.ncols();
            let mut worst = 0.0_f64;
            for a in 0..r {
                for b in a..r {
                    let dot: Complex64 = m
                        .column(a)
                        .iter()
                        .zip(m.column(b))
                        .map(|(x, y)| x.conj() * y)
                        .sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((dot * step - want).norm());
                }
            }
            worst
        };
        check(&self.modes1, self.step1).max(check(&self.modes2, self.step2))
    }
}

/// Full complex SVD of the amplitude matrix.
pub fn schmidt_decompose(state: &BiphotonState) -> Result<SchmidtSpectrum, ModelError> {
    let a = state.amplitude();
    let (n1, n2) = a.dim();
    let m = DMatrix::from_fn(n1, n2, |i, j| a[[i, j]]);
    let svd = m
        .try_svd(true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or(ModelError::DecompositionFailed)?;
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(ModelError::DecompositionFailed),
    };
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));

    let (d1, d2) = (state.grid1().step(), state.grid2().step());
    let scale = (d1 * d2).sqrt();
    let (r1, r2) = (d1.sqrt(), d2.sqrt());
    let values = order.iter().map(|&i| s[i] * scale).collect();
    let modes1 = Array2::from_shape_fn((n1, order.len()), |(j, c)| u[(j, order[c])] / r1);
    let modes2 = Array2::from_shape_fn((n2, order.len()), |(k, c)| vt[(order[c], k)] / r2);
    Ok(SchmidtSpectrum {
        values,
        modes1,
        modes2,
        step1: d1,
        step2: d2,
    })
}

/// Schmidt coefficients only (cheaper than [`schmidt_decompose`]).
pub fn schmidt_values(state: &BiphotonState) -> Result<Vec<f64>, ModelError> {
    let a = state.amplitude();
    let m = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]]);
    let svd = m
        .try_svd(false, false, SVD_EPS, SVD_MAX_ITER)
        .ok_or(ModelError::DecompositionFailed)?;
    Ok(sorted_scaled(
        svd.singular_values.iter().copied(),
        state.cell_area(),
    ))
}

/// Schmidt coefficients of a real, non-negative amplitude such as `|f|`,
/// given on a grid with cell area `cell_area`. The matrix is normalised first.
pub fn schmidt_values_real(
    amplitude: &Array2<f64>,
    cell_area: f64,
) -> Result<Vec<f64>, ModelError> {
    let norm = (amplitude.iter().map(|v| v * v).sum::<f64>() * cell_area).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(ModelError::ZeroSpectrum);
    }
    let m = DMatrix::from_fn(amplitude.nrows(), amplitude.ncols(), |i, j| {
        amplitude[[i, j]] / norm
    });
    let svd = m
        .try_svd(false, false, SVD_EPS, SVD_MAX_ITER)
        .ok_or(ModelError::DecompositionFailed)?;
    Ok(sorted_scaled(
        svd.singular_values.iter().copied(),
        cell_area,
    ))
}

fn sorted_scaled(values: impl Iterator<Item = f64>, cell_area: f64) -> Vec<f64> {
    let scale = cell_area.sqrt();
    let mut out: Vec<f64> = values.map(|s| s * scale).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// `K = (sum lambda^2)^2 / sum lambda^4`, ignoring coefficients below
/// [`RANK_FLOOR`] times the largest.
pub fn effective_schmidt_rank(values: &[f64]) -> Result<f64, ModelError> {
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    if !(top > 0.0) {
        return Err(ModelError::ZeroSpectrum);
    }
    let floor = RANK_FLOOR * top;
    let (mut s2, mut s4) = (0.0, 0.0);
    for &l in values.iter().filter(|&&l| l >= floor) {
        let l2 = l * l;
        s2 += l2;
        s4 += l2 * l2;
    }
    Ok(s2 * s2 / s4)
}
