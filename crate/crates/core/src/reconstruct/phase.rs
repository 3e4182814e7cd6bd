//! Phase differentials from sidebands and their concatenation into phase.
//!
//! Surfaces are oriented `[sheared, herald]`. A "row" is the set of bins
//! sharing one herald frequency; unwrapping and concatenation run along it.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::{ReconstructError, SidebandExtraction};
use crate::interferometer::ShearSettings;
use crate::model::FrequencyGrid;

/// Fraction of the row (or pattern) maximum below which bins are masked.
pub const SIGNAL_FLOOR: f64 = 0.05;

/// Largest wrapped step between adjacent bins of a row accepted by the
/// unwrapper. Filtered sidebands vary slowly along the row, so larger steps
/// indicate noise rather than phase.
pub const MAX_UNWRAP_STEP: f64 = PI / 2.0;

/// Minimum ratio of the sideband modulus to its shot-noise standard
/// deviation for a bin to enter the mask. At this ratio the phase noise is
/// about 0.2 rad, so noise-driven `2 pi` slips are rare.
pub const MIN_SIDEBAND_SNR: f64 = 3.0;

/// Number of already aligned neighbouring rows used to predict the phase
/// level of the next row during branch alignment.
const ALIGNMENT_NEIGHBOURS: usize = 32;

/// Rows needed before branch alignment trusts a fitted slope.
const MIN_SLOPE_POINTS: usize = 4;

/// Polynomial order of the common curve used to stitch interleaved chains.
const STITCH_ORDER: usize = 3;

/// Real-valued phase on the measurement grid, `[sheared, herald]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSurface {
    /// Phase in rad; meaningful only where `mask` is set.
    pub values: Array2<f64>,
    pub mask: Array2<bool>,
    /// Non-interferometric intensity, used as fit weight.
    pub weights: Array2<f64>,
    pub sheared_grid: FrequencyGrid,
    pub herald_grid: FrequencyGrid,
    /// Rows dropped because unwrapping failed.
    pub flagged_rows: usize,
    /// Row segments discarded because a mask gap disconnected them from the
    /// largest segment.
    pub dropped_segments: usize,
}

impl PhaseSurface {
    /// Each row of a concatenated phase is known only up to an additive
    /// function of the herald frequency; rows are anchored to zero at their
    /// centre-of-mass bin.
    pub const REFERENCE_NOTE: &'static str =
        "phase is defined per herald row up to an additive g(herald); each row is zero at its centre-of-mass bin";

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn row_indices(&self, j: usize) -> Vec<usize> {
        (0..self.mask.nrows())
            .filter(|&i| self.mask[[i, j]])
            .collect()
    }
}

/// `Delta phi(w, w_h) = phi(w, w_h) - phi(w + Omega, w_h)` from the sideband,
/// with the carrier `exp(i dw tau)` removed. The result is unwrapped along each
/// row and the rows' `2 pi` branches are aligned with each other.
///
/// Bins are kept where the row carries at least 5% of the busiest row's
/// counts, and both the baseband and the sideband modulus reach 5% of their
/// row maximum. For counted data the sideband modulus must also exceed
/// [`MIN_SIDEBAND_SNR`] times its shot-noise level. Rows with a wrapped step above [`MAX_UNWRAP_STEP`] are flagged
/// and dropped.
pub fn phase_differential(
    ext: &SidebandExtraction,
    s: &ShearSettings,
) -> Result<PhaseSurface, ReconstructError> {
    let m = s.shear_index(&ext.sheared_grid)?;
    let (n, nh) = ext.filtered_complex.dim();
    let x = ext.sheared_grid.detunings();
    let tau = s.delay_fs;

    let z = Array2::from_shape_fn((n, nh), |(i, j)| {
        ext.filtered_complex[[i, j]] * Complex64::from_polar(1.0, -x[i] * tau)
    });
    let b = &ext.baseband;
    let row_totals: Array1<f64> =
        Array1::from_shape_fn(nh, |j| b.column(j).iter().map(|v| v.max(0.0)).sum());
    let max_total = row_totals.iter().copied().fold(0.0, f64::max);

    let mut values = Array2::zeros((n, nh));
    let mut mask = Array2::from_elem((n, nh), false);
    let mut flagged_rows = 0;
    for j in 0..nh {
        if !(row_totals[j] > 0.0 && row_totals[j] >= SIGNAL_FLOOR * max_total) {
            continue;
        }
        let bmax = b.column(j).iter().copied().fold(0.0, f64::max);
        let zmax = z.column(j).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let zmin = match &ext.noise_variance {
            Some(var) => MIN_SIDEBAND_SNR * var[j].sqrt(),
            None => 0.0,
        };
        let keep: Vec<bool> = (0..n)
            .map(|i| {
                i + m < n
                    && b[[i, j]] > 0.0
                    && b[[i, j]] >= SIGNAL_FLOOR * bmax
                    && z[[i, j]].norm() >= SIGNAL_FLOOR * zmax
                    && z[[i, j]].norm() >= zmin
            })
            .collect();
        // unwrap along the row; across small mask gaps continue from the
        // last kept bin so the whole row sits on one branch
        let mut ok = true;
        let mut prev: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| keep[i]) {
            let wrapped = z[[i, j]].arg();
            let value = match prev {
                None => wrapped,
                Some((last_i, last)) => {
                    let step = wrap(wrapped - last);
                    if last_i + 1 == i && step.abs() > MAX_UNWRAP_STEP {
                        ok = false;
                        break;
                    }
                    last + step
                }
            };
            values[[i, j]] = value;
            prev = Some((i, value));
        }
        if !ok {
            flagged_rows += 1;
            continue;
        }
        // the absolute branch is set at the row's spectral peak rather than
        // at its first kept bin, where a large local chirp may already wrap
        if let Some(peak) = (0..n)
            .filter(|&i| keep[i])
            .max_by(|&a, &c| b[[a, j]].total_cmp(&b[[c, j]]))
        {
            let shift = values[[peak, j]] - wrap(values[[peak, j]]);
            for i in (0..n).filter(|&i| keep[i]) {
                values[[i, j]] -= shift;
            }
        }
        for i in 0..n {
            mask[[i, j]] = keep[i];
        }
    }

    let mut surface = PhaseSurface {
        values,
        mask,
        weights: b.mapv(|v| v.max(0.0)),
        sheared_grid: ext.sheared_grid,
        herald_grid: ext.herald_grid,
        flagged_rows,
        dropped_segments: 0,
    };
    align_row_branches(&mut surface);
    Ok(surface)
}

/// Wraps to (-pi, pi].
fn wrap(v: f64) -> f64 {
    let w = v.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Brings every row's (weighted mean) level onto the `2 pi` branch predicted
/// by its nearest already aligned rows, growing outwards from the heaviest
/// row towards whichever neighbouring row is heavier.
/// Within one row only differences along the sheared axis are unwrapped, so
/// the relative branch of different rows is otherwise arbitrary. Rows whose
/// level falls more than [`MAX_UNWRAP_STEP`] from every branch are ambiguous;
/// they are flagged and dropped rather than guessed.
fn align_row_branches(surface: &mut PhaseSurface) {
    let nh = surface.mask.ncols();
    let mut level = vec![None; nh];
    let mut weight = vec![0.0; nh];
    for j in 0..nh {
        let (mut num, mut den) = (0.0, 0.0);
        for i in surface.row_indices(j) {
            let w = surface.weights[[i, j]];
            num += w * surface.values[[i, j]];
            den += w;
        }
        if den > 0.0 {
            level[j] = Some(num / den);
            weight[j] = den;
        }
    }
    let Some(start) = (0..nh)
        .filter(|&j| level[j].is_some())
        .max_by(|&a, &b| weight[a].total_cmp(&weight[b]))
    else {
        return;
    };
    let y = surface.herald_grid.detunings();
    let mut aligned = level.clone();
    let mut order = vec![start];
    let (mut lo, mut hi) = (start, start);
    // grow the aligned interval one row at a time, always towards the
    // heavier frontier row, so both sides are predicted from the best data
    while lo > 0 || hi + 1 < nh {
        let below = (lo > 0).then(|| lo - 1);
        let above = (hi + 1 < nh).then(|| hi + 1);
        let ju = match (below, above) {
            (Some(b), Some(a)) => {
                if weight[b] >= weight[a] {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        if ju < lo {
            lo = ju;
        } else {
            hi = ju;
        }
        let Some(own) = level[ju] else { continue };
        let mut nearest: Vec<usize> = order.clone();
        nearest.sort_by_key(|&r| r.abs_diff(ju));
        let points: Vec<(f64, f64, f64)> = nearest
            .iter()
            .take(ALIGNMENT_NEIGHBOURS)
            .map(|&r| {
                (
                    y[r],
                    aligned[r].expect("aligned rows have a level"),
                    weight[r],
                )
            })
            .collect();
        let offset = extrapolate(&points, y[ju]) - own;
        let k = (offset / TAU).round();
        if (offset - k * TAU).abs() > MAX_UNWRAP_STEP {
            for i in 0..surface.mask.nrows() {
                surface.mask[[i, ju]] = false;
            }
            surface.flagged_rows += 1;
            continue;
        }
        for i in 0..surface.mask.nrows() {
            if surface.mask[[i, ju]] {
                surface.values[[i, ju]] += k * TAU;
            }
        }
        aligned[ju] = Some(own + k * TAU);
        order.push(ju);
    }
}

/// Weighted linear extrapolation of `(position, level, weight)` points to
/// `at`. Fewer than [`MIN_SLOPE_POINTS`] points are extended flat.
fn extrapolate(points: &[(f64, f64, f64)], at: f64) -> f64 {
    let total: f64 = points.iter().map(|p| p.2).sum();
    let my = points.iter().map(|p| p.2 * p.0).sum::<f64>() / total;
    let mv = points.iter().map(|p| p.2 * p.1).sum::<f64>() / total;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (py, v, w) in points {
        sxy += w * (py - my) * (v - mv);
        sxx += w * (py - my).powi(2);
    }
    let slope = if points.len() >= MIN_SLOPE_POINTS && sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    };
    mv + slope * (at - my)
}

/// Integrates a phase differential along the sheared axis.
///
/// With `Omega = m` steps, `phi(i + m) = phi(i) - Delta phi(i)` links bins in
/// `m` interleaved chains. Each unbroken chain piece is summed from its
/// midpoint; the pieces are then stitched by a least-squares fit of one
/// offset per piece plus a common cubic in the sheared detuning. Each row is
/// finally anchored to zero at its centre-of-mass bin. Mask gaps of `m` or
/// more bins disconnect a row; only the segment with the most bins is kept.
pub fn concatenate_phase(
    dphi: &PhaseSurface,
    s: &ShearSettings,
) -> Result<PhaseSurface, ReconstructError> {
    let m = s.shear_index(&dphi.sheared_grid)?;
    if m == 0 {
        return Err(ReconstructError::Interferometer(
            crate::interferometer::InterferometerError::ZeroShear(s.shear_rad_per_fs),
        ));
    }
    let (n, nh) = dphi.values.dim();
    let x = dphi.sheared_grid.detunings();
    let mut values = Array2::zeros((n, nh));
    let mut mask = Array2::from_elem((n, nh), false);
    let mut dropped_segments = 0;

    for j in 0..nh {
        let idx = dphi.row_indices(j);
        if idx.is_empty() {
            continue;
        }
        let mut segments: Vec<Vec<usize>> = vec![vec![idx[0]]];
        for w in idx.windows(2) {
            if w[1] - w[0] > m {
                segments.push(Vec::new());
            }
            segments.last_mut().unwrap().push(w[1]);
        }
        dropped_segments += segments.len() - 1;
        let segment = segments.into_iter().max_by_key(|s| s.len()).unwrap();

        let valid = |i: usize| dphi.mask[[i, j]] && segment.binary_search(&i).is_ok();
        // phase is defined on every bin reached by a link
        let first = segment[0];
        let last = segment[segment.len() - 1] + m;
        let pieces = chain_pieces(first, last, m, &valid, |i| dphi.values[[i, j]]);
        let row = stitch(&pieces, &x);
        // anchor at the centre of mass of the defined bins
        let defined: Vec<usize> = row.iter().map(|(i, _)| *i).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &defined {
            let w = dphi.weights[[i, j]];
            num += w * i as f64;
            den += w;
        }
        let com = if den > 0.0 {
            num / den
        } else {
            defined[defined.len() / 2] as f64
        };
        let anchor_bin = *defined
            .iter()
            .min_by(|&&a, &&b| (a as f64 - com).abs().total_cmp(&(b as f64 - com).abs()))
            .unwrap();
        let anchor = row.iter().find(|(i, _)| *i == anchor_bin).unwrap().1;
        for (i, v) in row {
            values[[i, j]] = v - anchor;
            mask[[i, j]] = true;
        }
    }
    if !mask.iter().any(|&b| b) {
        return Err(ReconstructError::EmptyMask);
    }
    Ok(PhaseSurface {
        values,
        mask,
        weights: dphi.weights.clone(),
        sheared_grid: dphi.sheared_grid,
        herald_grid: dphi.herald_grid,
        flagged_rows: dphi.flagged_rows,
        dropped_segments: dphi.dropped_segments + dropped_segments,
    })
}

/// Bins and relative phases of one unbroken chain `i, i+m, i+2m, ...`.
struct Piece {
    bins: Vec<usize>,
    phase: Vec<f64>,
}

fn chain_pieces(
    first: usize,
    last: usize,
    m: usize,
    valid: &dyn Fn(usize) -> bool,
    dphi: impl Fn(usize) -> f64,
) -> Vec<Piece> {
    let mut pieces = Vec::new();
    for r in first..(first + m).min(last + 1) {
        let mut current: Option<Piece> = None;
        for i in (r..=last).step_by(m) {
            if i >= r + m && valid(i - m) {
                let p = current
                    .as_mut()
                    .expect("a valid link always extends an open piece");
                let prev = *p.phase.last().unwrap();
                p.bins.push(i);
                p.phase.push(prev - dphi(i - m));
            } else {
                pieces.extend(current.take());
                if valid(i) {
                    current = Some(Piece {
                        bins: vec![i],
                        phase: vec![0.0],
                    });
                }
            }
        }
        pieces.extend(current.take());
    }
    // reference each piece to its midpoint for conditioning
    for p in &mut pieces {
        let mid = p.phase[p.phase.len() / 2];
        p.phase.iter_mut().for_each(|v| *v -= mid);
    }
    pieces
}

/// Solves `phase_k(i) + c_k = P(x_i)` in least squares for piece offsets `c_k`
/// and a common polynomial `P` without constant term, returning the stitched
/// `(bin, phase)` list sorted by bin.
fn stitch(pieces: &[Piece], x: &Array1<f64>) -> Vec<(usize, f64)> {
    if pieces.len() == 1 {
        let p = &pieces[0];
        return p
            .bins
            .iter()
            .copied()
            .zip(p.phase.iter().copied())
            .collect();
    }
    let rows: usize = pieces.iter().map(|p| p.bins.len()).sum();
    let lo = pieces
        .iter()
        .flat_map(|p| p.bins.iter())
        .map(|&i| x[i])
        .fold(f64::INFINITY, f64::min);
    let hi = pieces
        .iter()
        .flat_map(|p| p.bins.iter())
        .map(|&i| x[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let (mid, half) = ((lo + hi) / 2.0, ((hi - lo) / 2.0).max(f64::MIN_POSITIVE));
    let cols = pieces.len() + STITCH_ORDER;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    let mut r = 0;
    for (k, p) in pieces.iter().enumerate() {
        for (&i, &v) in p.bins.iter().zip(&p.phase) {
            let u = (x[i] - mid) / half;
            a[(r, k)] = -1.0;
            for d in 1..=STITCH_ORDER {
                a[(r, pieces.len() + d - 1)] = u.powi(d as i32);
            }
            rhs[r] = v;
            r += 1;
        }
    }
    let svd = a.svd(true, true);
    let sol = svd.solve(&rhs, 1e-10).expect("U and V were computed");
    let mut out: Vec<(usize, f64)> = pieces
        .iter()
        .enumerate()
        .flat_map(|(k, p)| {
            let c = sol[k];
            p.bins
                .iter()
                .copied()
                .zip(p.phase.iter().map(move |v| v + c))
        })
        .collect();
    out.sort_by_key(|(i, _)| *i);
    out
}
