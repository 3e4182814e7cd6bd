//! Discrete Fourier transforms on centred grids.
//!
//! Frequency samples sit at `(j - N/2) * dw` and time samples at
//! `(k - N/2) * dt` with `dt = 2 pi / (N dw)`. The frequency-to-time transform
//! uses the `exp(-i w t)` kernel everywhere in the crate,
//!
//! ```text
//! g(t_k) = dw / sqrt(2 pi) * sum_j f(w_j) exp(-i w_j t_k)
//! ```
//!
//! so a spectral phase with slope `d phi / d w = t0` produces a pulse centred
//! at `t = +t0`. With this scaling the transform is unitary with respect to
//! the grid measures (`sum |f|^2 dw == sum |g|^2 dt`).

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Direction of a centred transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Frequency to time, kernel `exp(-i w t)`.
    ToTime,
    /// Time to frequency, kernel `exp(+i w t)`.
    ToFrequency,
}

/// Sample spacing of the conjugate axis for `count` samples of spacing `step`.
pub fn conjugate_step(step: f64, count: usize) -> f64 {
    TAU / (count as f64 * step)
}

/// Applies the centred transform along `axis` of `data` in place. `step` is
/// the sample spacing of the input axis; `count` must be a multiple of 4.
pub fn centered_transform(data: &mut Array2<Complex64>, axis: Axis, step: f64, dir: Direction) {
    let n = data.len_of(axis);
    debug_assert!(
        n % 4 == 0,
        "centred transform needs a multiple of 4 samples"
    );
    let mut planner = FftPlanner::<f64>::new();
    let fft: Arc<dyn Fft<f64>> = match dir {
        Direction::ToTime => planner.plan_fft_forward(n),
        Direction::ToFrequency => planner.plan_fft_inverse(n),
    };
    let scale = step / TAU.sqrt();
    let mut buffer = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for mut lane in data.lanes_mut(axis) {
        for (j, (b, v)) in buffer.iter_mut().zip(lane.iter()).enumerate() {
            *b = if j % 2 == 0 { *v } else { -*v };
        }
        fft.process_with_scratch(&mut buffer, &mut scratch);
        for (k, (v, b)) in lane.iter_mut().zip(buffer.iter()).enumerate() {
            let sign = if k % 2 == 0 { scale } else { -scale };
            *v = *b * sign;
        }
    }
}

/// Plain (uncentred) forward FFT of every column of a real matrix along axis 0.
/// Bin `k` corresponds to conjugate coordinate [`fft_coordinate`].
pub fn fft_columns(values: &Array2<f64>) -> Array2<Complex64> {
    let mut out = values.mapv(|v| Complex64::new(v, 0.0));
    let n = out.nrows();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buffer = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in out.lanes_mut(Axis(0)) {
        buffer
            .iter_mut()
            .zip(lane.iter())
            .for_each(|(b, v)| *b = *v);
        fft.process(&mut buffer);
        lane.iter_mut()
            .zip(buffer.iter())
            .for_each(|(v, b)| *v = *b);
    }
    out
}

/// Normalised inverse of [`fft_columns`] (complex output).
pub fn ifft_columns(spectrum: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = spectrum.clone();
    let n = out.nrows();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let norm = 1.0 / n as f64;
    let mut buffer = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in out.lanes_mut(Axis(0)) {
        buffer
            .iter_mut()
            .zip(lane.iter())
            .for_each(|(b, v)| *b = *v);
        fft.process(&mut buffer);
        lane.iter_mut()
            .zip(buffer.iter())
            .for_each(|(v, b)| *v = *b * norm);
    }
    out
}

/// Conjugate coordinate of FFT bin `k` for `n` samples of spacing `step`, with
/// the `exp(-i w T)` kernel: bins above `n/2` map to negative `T`.
pub fn fft_coordinate(k: usize, n: usize, step: f64) -> f64 {
    let signed = if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    };
    signed * conjugate_step(step, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;

    /// Direct O(N^2) evaluation of the documented kernel.
    fn direct(f: &[Complex64], step: f64) -> Vec<Complex64> {
        let n = f.len();
        let dt = conjugate_step(step, n);
        (0..n)
            .map(|k| {
                let t = (k as f64 - (n / 2) as f64) * dt;
                f.iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                        let w = (j as f64 - (n / 2) as f64) * step;
                        acc + v * Complex64::from_polar(1.0, -w * t)
                    })
                    * (step / TAU.sqrt())
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        let n = 16;
        let step = 0.37;
        let f: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64 * 0.3).sin(), (j as f64 * 0.7).cos()))
            .collect();
        let mut a = Array2::from_shape_vec((n, 1), f.clone()).unwrap();
        centered_transform(&mut a, Axis(0), step, Direction::ToTime);
        for (got, want) in a.column(0).iter().zip(direct(&f, step)) {
            assert_relative_eq!(got.re, want.re, epsilon = 1e-12);
            assert_relative_eq!(got.im, want.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_restores_input() {
        let n = 32;
        let step = 0.01;
        let orig = Array2::from_shape_fn((n, 3), |(i, j)| {
            Complex64::new((i * j) as f64 * 0.1, i as f64 - j as f64)
        });
        let mut a = orig.clone();
        centered_transform(&mut a, Axis(0), step, Direction::ToTime);
        centered_transform(
            &mut a,
            Axis(0),
            conjugate_step(step, n),
            Direction::ToFrequency,
        );
        for (x, y) in a.iter().zip(orig.iter()) {
            assert!((x - y).norm() < 1e-10);
        }
    }
}
