//! Sum-of-exponentials fitting.
//!
//! Model: `z[n] = sum_m c_m u_m^n`. The model order comes from the singular
//! values of the Hankel matrix of `z`; the poles `u_m` are the roots of the
//! least-squares annihilating filter and the weights `c_m` follow from a
//! Vandermonde least-squares fit.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// One exponential term `c u^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpComponent {
    pub amplitude: Complex64,
    pub pole: Complex64,
}

impl ExpComponent {
    pub fn evaluate(&self, n: usize) -> Complex64 {
        self.amplitude * self.pole.powu(n as u32)
    }
}

/// Relative singular-value floor below which a direction counts as empty.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// Number of Hankel rows used for a sequence of length `len`.
pub fn hankel_rows(len: usize) -> usize {
    len / 2 + 1
}

/// `H[i, j] = z[i + j]` with `rows` rows and `len - rows + 1` columns.
pub fn hankel(z: &[Complex64], rows: usize) -> DMatrix<Complex64> {
    let cols = z.len() + 1 - rows;
    DMatrix::from_fn(rows, cols, |i, j| z[i + j])
}

/// Singular values of the order-selection Hankel matrix, descending.
pub fn hankel_singular_values(z: &[Complex64]) -> Vec<f64> {
    if z.len() < 2 {
        return Vec::new();
    }
    let h = hankel(z, hankel_rows(z.len()));
    let mut sv: Vec<f64> = h.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Estimates the number of exponentials in `z` from the largest relative gap
/// between consecutive Hankel singular values. Values under
/// `RELATIVE_FLOOR * σ_max` are clamped to that floor, so an exactly
/// low-rank sequence yields its rank.
pub fn estimate_fold_count(z: &[Complex64]) -> usize {
    let sv = hankel_singular_values(z);
    order_from_gaps(&sv, 0.0, max_order(z.len()))
}

/// Like [`estimate_fold_count`] but ignores singular values below an
/// absolute noise floor; with noise present this is what keeps a fold-free
/// frame at zero.
pub fn estimate_fold_count_above(z: &[Complex64], noise_floor: f64) -> usize {
    let sv = hankel_singular_values(z);
    let max = max_order(z.len());
    if noise_floor > 0.0 {
        sv.iter().take(max).filter(|&&s| s > noise_floor).count()
    } else {
        order_from_gaps(&sv, 0.0, max)
    }
}

/// Highest order that still leaves the Hankel matrix a null direction:
/// `min(rows, cols) - 1`, i.e. `2 M + 1 <= len`.
fn max_order(len: usize) -> usize {
    len.saturating_sub(1) / 2
}

fn order_from_gaps(sv: &[f64], abs_floor: f64, max: usize) -> usize {
    let Some(&top) = sv.first() else { return 0 };
    let floor = (RELATIVE_FLOOR * top).max(abs_floor).max(f64::MIN_POSITIVE);
    if top <= 1e-300 || top < abs_floor {
        return 0;
    }
    let limit = max.min(sv.len());
    let mut best = (0usize, 1.0f64);
    for i in 0..limit {
        let here = sv[i].max(floor);
        let next = sv.get(i + 1).copied().unwrap_or(0.0).max(floor);
        let gap = here / next;
        if gap > best.1 {
            best = (i + 1, gap);
        }
    }
    // A flat spectrum above the floor carries no gap: treat it as full order.
    if best.0 == 0 {
        sv.iter().take(limit).filter(|&&s| s > floor).count()
    } else {
        best.0
    }
}

/// Fits `order` exponentials to `z`.
///
/// A rank-deficient annihilation system (model order too high) is retried
/// once at `order - 1`.
pub fn prony(z: &[Complex64], order: usize) -> Result<Vec<ExpComponent>> {
    match prony_once(z, order) {
        Err(Error::RankDeficient(_)) if order > 1 => prony_once(z, order - 1),
        other => other,
    }
}

fn prony_once(z: &[Complex64], order: usize) -> Result<Vec<ExpComponent>> {
    if order == 0 {
        return Ok(Vec::new());
    }
    if z.len() < 2 * order {
        return Err(Error::TooShort {
            needed: 2 * order,
            got: z.len(),
        });
    }
    let rows = z.len() - order;
    // z[i + M] = -sum_{j=1..M} h_j z[i + M - j]
    let a = DMatrix::from_fn(rows, order, |i, j| z[i + order - 1 - j]);
    let b = DVector::from_fn(rows, |i, _| -z[i + order]);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-10 * smax {
        return Err(Error::RankDeficient(order));
    }
    let h = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::EstimationFailure(e.to_string()))?;
    let coeffs: Vec<Complex64> = h.iter().copied().collect();
    fit_amplitudes(z, polynomial_roots(&coeffs))
}

/// Subspace (ESPRIT) variant: the poles are the eigenvalues of the shift
/// operator restricted to the `order`-dimensional dominant column space of
/// the Hankel matrix. Discarding the noise subspace first makes this far
/// less noise-sensitive than the plain annihilating filter, and it is just
/// as exact on noiseless input.
pub fn prony_subspace(z: &[Complex64], order: usize) -> Result<Vec<ExpComponent>> {
    if order == 0 {
        return Ok(Vec::new());
    }
    let rows = hankel_rows(z.len());
    let cols = z.len() + 1 - rows;
    if rows <= order || cols < order {
        return Err(Error::TooShort {
            needed: 2 * order + 1,
            got: z.len(),
        });
    }
    let svd = hankel(z, rows).svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let signal = u.columns(0, order);
    let upper = signal.rows(0, rows - 1).into_owned();
    let lower = signal.rows(1, rows - 1).into_owned();
    let shift = upper
        .svd(true, true)
        .solve(&lower, 1e-12)
        .map_err(|e| Error::EstimationFailure(e.to_string()))?;
    let (_, t) = shift.schur().unpack();
    let poles: Vec<Complex64> = (0..order).map(|i| t[(i, i)]).collect();
    fit_amplitudes(z, poles)
}

fn fit_amplitudes(z: &[Complex64], poles: Vec<Complex64>) -> Result<Vec<ExpComponent>> {
    let v = DMatrix::from_fn(z.len(), poles.len(), |n, m| poles[m].powu(n as u32));
    let zv = DVector::from_column_slice(z);
    let amps = v
        .svd(true, true)
        .solve(&zv, 0.0)
        .map_err(|e| Error::EstimationFailure(e.to_string()))?;
    Ok(poles
        .into_iter()
        .zip(amps.iter())
        .map(|(pole, &amplitude)| ExpComponent { amplitude, pole })
        .collect())
}

/// Roots of the monic polynomial `x^M + a_1 x^{M-1} + ... + a_M`, from the
/// companion-matrix eigenvalues, each polished by a few Newton steps.
pub fn polynomial_roots(tail: &[Complex64]) -> Vec<Complex64> {
    let m = tail.len();
    if m == 0 {
        return Vec::new();
    }
    if m == 1 {
        return vec![-tail[0]];
    }
    let companion = DMatrix::from_fn(m, m, |i, j| {
        if i == 0 {
            -tail[j]
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let (_, t) = companion.schur().unpack();
    (0..m).map(|i| newton_polish(tail, t[(i, i)])).collect()
}

fn newton_polish(tail: &[Complex64], mut x: Complex64) -> Complex64 {
    for _ in 0..4 {
        let (mut p, mut dp) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        for &a in tail {
            dp = dp * x + p;
            p = p * x + a;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        x -= step;
        if step.norm() <= 1e-15 * x.norm().max(1.0) {
            break;
        }
    }
    x
}
