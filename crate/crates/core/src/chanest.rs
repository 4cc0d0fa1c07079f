//! Single-path SI channel estimation from one period of a folded pilot.
//!
//! The pilot is sampled `K` times per period, so after a circular first
//! difference the DFT of the folded record splits cleanly: the bandlimited
//! part only occupies harmonics `|p| <= P`, and every other bin carries
//! nothing but the residue's jumps, a sum of `M` complex exponentials. Prony
//! on those bins gives the jumps, which are subtracted from the in-band bins
//! before dividing by the pilot spectrum.

use crate::dsp;
use crate::error::{invalid, Error, Result};
use crate::prony::{self, ExpComponent};
use crate::waveforms::{BasebandSignal, PilotSpec, SparseChannel};
use num_complex::Complex64;
use std::f64::consts::PI;

/// DFT of the circularly differenced folded record plus its band layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub bins: Vec<Complex64>,
    pub half_bandwidth: usize,
}

impl SpectralFrame {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// In-band bins `[0, P] ∪ [K - P, K - 1]`.
    pub fn inband_indices(&self) -> Vec<usize> {
        let k = self.len();
        let p = self.half_bandwidth;
        (0..=p).chain(k - p..k).collect()
    }

    /// Out-of-band bins `P + 1 ..= K - P - 1`, in order.
    pub fn outband_indices(&self) -> std::ops::Range<usize> {
        self.half_bandwidth + 1..self.len() - self.half_bandwidth
    }

    /// The Prony input: out-of-band bins, negated so they read as the
    /// residue contribution.
    pub fn outband(&self) -> Vec<Complex64> {
        self.outband_indices().map(|n| -self.bins[n]).collect()
    }
}

/// One jump of the residue: `ε[k+1] - ε[k] = amplitude` at `k = location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fold {
    pub amplitude: Complex64,
    pub location: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub lambda: f64,
    pub folds: Vec<Fold>,
}

impl FoldModel {
    pub fn count(&self) -> usize {
        self.folds.len()
    }
}

/// Circular first difference followed by a `K`-point DFT.
pub fn difference_dft(folded: &[Complex64], half_bandwidth: usize) -> Result<SpectralFrame> {
    let k = folded.len();
    if k < 2 * half_bandwidth + 2 {
        return Err(Error::TooShort {
            needed: 2 * half_bandwidth + 2,
            got: k,
        });
    }
    let diff: Vec<Complex64> = (0..k).map(|i| folded[(i + 1) % k] - folded[i]).collect();
    Ok(SpectralFrame {
        bins: dsp::fft(&diff),
        half_bandwidth,
    })
}

/// The jumps' contribution to every bin of a `K`-point frame.
pub fn reconstruct_residue_spectrum(model: &FoldModel, k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|n| {
            model
                .folds
                .iter()
                .map(|f| f.amplitude * Complex64::from_polar(1.0, -2.0 * PI * (n * f.location) as f64 / k as f64))
                .sum()
        })
        .collect()
}

/// Snaps each rail of `v` to the nearest multiple of `2λ`.
fn snap_lattice(v: Complex64, lambda: f64) -> Complex64 {
    let step = 2.0 * lambda;
    Complex64::new((v.re / step).round() * step, (v.im / step).round() * step)
}

/// Turns Prony components fitted on bins `first, first + 1, ...` into
/// lattice-snapped jumps at integer locations, refitting the amplitudes once
/// the locations are fixed.
fn folds_from_components(
    components: &[ExpComponent],
    z: &[Complex64],
    first: usize,
    k: usize,
    lambda: f64,
) -> Vec<Fold> {
    let mut locations: Vec<usize> = components
        .iter()
        .map(|c| {
            let nu = -c.pole.arg() * k as f64 / (2.0 * PI);
            (nu.round() as i64).rem_euclid(k as i64) as usize
        })
        .collect();
    locations.sort_unstable();
    locations.dedup();
    if locations.is_empty() {
        return Vec::new();
    }

    let basis = |n: usize, loc: usize| Complex64::from_polar(1.0, -2.0 * PI * ((first + n) * loc) as f64 / k as f64);
    let a = nalgebra::DMatrix::from_fn(z.len(), locations.len(), |n, m| basis(n, locations[m]));
    let b = nalgebra::DVector::from_column_slice(z);
    let amps: Vec<Complex64> = match a.svd(true, true).solve(&b, 1e-12) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => return Vec::new(),
    };
    locations
        .into_iter()
        .zip(amps)
        .map(|(location, amp)| Fold {
            amplitude: snap_lattice(amp, lambda),
            location,
        })
        .filter(|f| f.amplitude != Complex64::new(0.0, 0.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayEstimator {
    /// Least squares over the unwrapped phases of all usable in-band ratios.
    #[default]
    LeastSquares,
    /// The three-point ratio `(d[n] - d[n+1]) / (d[n-1] - d[n])`, averaged
    /// over every usable triple; needs `P >= 3`.
    ThreePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoleEstimator {
    /// Least-squares annihilating filter and polynomial rooting.
    AnnihilatingFilter,
    /// Shift invariance of the dominant Hankel subspace.
    #[default]
    Subspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOptions {
    /// Variance of the additive noise on each (complex) folded sample,
    /// thermal plus quantization. Sets the fold-count noise floor; `None`
    /// falls back to the singular-value gap rule.
    pub noise_variance: Option<f64>,
    pub delay: DelayEstimator,
    pub poles: PoleEstimator,
    /// Caps the number of jumps handed to Prony.
    pub max_folds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub channel: SparseChannel,
    pub folds: FoldModel,
    pub frame: SpectralFrame,
    /// `(p, d[p])` for every in-band harmonic used in the deconvolution.
    pub ratios: Vec<(i64, Complex64)>,
}

/// Largest singular value expected from a Hankel matrix of pure noise bins.
///
/// Each differenced bin has variance `2 K σ²`; the spectral norm of an
/// `r × c` matrix of such entries stays below `s (√r + √c)` with high
/// probability, and the factor of 2 is margin.
pub fn hankel_noise_floor(noise_variance: f64, k: usize, len: usize) -> f64 {
    if len < 2 {
        return 0.0;
    }
    let s = (2.0 * k as f64 * noise_variance).sqrt();
    let rows = prony::hankel_rows(len) as f64;
    let cols = (len + 1) as f64 - rows;
    2.0 * s * (rows.sqrt() + cols.sqrt())
}

/// Estimates the residue jumps of a folded pilot frame.
pub fn estimate_folds(frame: &SpectralFrame, lambda: f64, opts: &EstimatorOptions) -> Result<FoldModel> {
    let z = frame.outband();
    let k = frame.len();
    let mut count = match opts.noise_variance {
        Some(var) if var > 0.0 => prony::estimate_fold_count_above(&z, hankel_noise_floor(var, k, z.len())),
        _ => prony::estimate_fold_count(&z),
    };
    count = count.min(z.len() / 2);
    if let Some(cap) = opts.max_folds {
        count = count.min(cap);
    }
    let components = match opts.poles {
        PoleEstimator::AnnihilatingFilter => prony::prony(&z, count)?,
        PoleEstimator::Subspace => prony::prony_subspace(&z, count)?,
    };
    Ok(FoldModel {
        lambda,
        folds: folds_from_components(&components, &z, frame.half_bandwidth + 1, k, lambda),
    })
}

/// Estimates `(A, τ)` of the SI channel from one folded period of the pilot.
///
/// `folded_pilot` must hold exactly `K` samples taken at `T = T_p / K`; no
/// SoI may be present. The returned amplitude is the end-to-end gain seen
/// against `pilot`, and the delay lies in `[0, T_p)`.
pub fn estimate_si_channel(
    folded_pilot: &BasebandSignal,
    pilot: &PilotSpec,
    lambda: f64,
    opts: &EstimatorOptions,
) -> Result<ChannelEstimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("{lambda} must be > 0")));
    }
    let k = pilot.sample_count();
    if folded_pilot.len() != k {
        return Err(Error::LengthMismatch {
            left: folded_pilot.len(),
            right: k,
        });
    }
    let half = pilot.half_bandwidth();
    let frame = difference_dft(folded_pilot.samples(), half)?;
    let folds = estimate_folds(&frame, lambda, opts)?;
    let residue = reconstruct_residue_spectrum(&folds, k);

    let peak = (1..=half as i64)
        .map(|p| pilot_difference_bin(pilot, p).norm())
        .fold(0.0, f64::max);
    let mut ratios = Vec::with_capacity(2 * half);
    for p in (-(half as i64)..=half as i64).filter(|&p| p != 0) {
        let g = pilot_difference_bin(pilot, p);
        if g.norm() <= 1e-9 * peak {
            continue;
        }
        let n = dsp::bin_of(p, k);
        ratios.push((p, (frame.bins[n] + residue[n]) / g));
    }
    if ratios.len() < 2 {
        return Err(Error::EstimationFailure(format!(
            "only {} usable pilot bins",
            ratios.len()
        )));
    }

    let amplitude = ratios.iter().map(|(_, d)| d.norm()).sum::<f64>() / ratios.len() as f64;
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::EstimationFailure("zero deconvolved amplitude".into()));
    }
    let w0 = pilot.fundamental();
    let phase_step = match opts.delay {
        DelayEstimator::LeastSquares => phase_slope(&ratios),
        DelayEstimator::ThreePoint => three_point_phase(&ratios)?,
    };
    let delay = (-phase_step / w0).rem_euclid(pilot.period());
    // rem_euclid can land exactly on the period through rounding.
    let delay = if delay >= pilot.period() { 0.0 } else { delay };
    Ok(ChannelEstimate {
        channel: SparseChannel::self_interference(amplitude, delay)?,
        folds,
        frame,
        ratios,
    })
}

/// DFT of the circularly differenced pilot at harmonic `p`:
/// `K γ_p (e^{j2πp/K} - 1)`.
pub fn pilot_difference_bin(pilot: &PilotSpec, p: i64) -> Complex64 {
    let k = pilot.sample_count() as f64;
    let rot = Complex64::from_polar(1.0, 2.0 * PI * p as f64 / k) - 1.0;
    pilot.coeff(p) * rot * k
}

fn wrap(phase: f64) -> f64 {
    (phase + PI).rem_euclid(2.0 * PI) - PI
}

/// Least-squares slope `φ` of `arg d[p] ≈ p φ`, seeded from the first
/// harmonics so that the residual phases are small enough to unwrap.
fn phase_slope(ratios: &[(i64, Complex64)]) -> f64 {
    // Every d[p] / |d[p]|^(1/p) estimates e^{jφ}; the lowest harmonics are
    // unambiguous.
    let seed: Complex64 = ratios
        .iter()
        .filter(|(p, _)| p.abs() == 1)
        .map(|&(p, d)| if p > 0 { d } else { d.conj() })
        .sum();
    let mut phi = if seed.norm() > 0.0 {
        seed.arg()
    } else {
        let (p, d) = ratios[0];
        d.arg() / p as f64
    };
    // Two passes: the first absorbs any seed error large enough to
    // mis-unwrap high harmonics.
    for _ in 0..2 {
        let (num, den) = ratios.iter().fold((0.0, 0.0), |(num, den), &(p, d)| {
            let pf = p as f64;
            let w = d.norm();
            let r = wrap(d.arg() - pf * phi);
            (num + w * pf * r, den + w * pf * pf)
        });
        if den > 0.0 {
            phi += num / den;
        }
    }
    phi
}

fn three_point_phase(ratios: &[(i64, Complex64)]) -> Result<f64> {
    let lookup = |p: i64| ratios.iter().find(|(q, _)| *q == p).map(|(_, d)| *d);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(n, dn) in ratios {
        if let (Some(prev), Some(next)) = (lookup(n - 1), lookup(n + 1)) {
            if n - 1 == 0 || n + 1 == 0 {
                continue;
            }
            let den = prev - dn;
            if den.norm() > 0.0 {
                let q = (dn - next) / den;
                acc += q / q.norm().max(f64::MIN_POSITIVE);
            }
        }
    }
    if acc.norm() == 0.0 {
        return Err(Error::EstimationFailure(
            "three-point delay estimate needs three consecutive in-band harmonics".into(),
        ));
    }
    Ok(acc.arg())
}
