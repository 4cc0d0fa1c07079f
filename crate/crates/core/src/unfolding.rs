//! Recovery of high-dynamic-range samples from modulo samples.
//!
//! For an oversampled bandlimited `r`, the `L`-th difference `Δ^L r` is
//! smaller than `λ`, so folding it again recovers it exactly and exposes the
//! lattice-valued `Δ^L ε` of the residue `ε = r - M_λ(r)`. The residue is then
//! rebuilt one order at a time: each anti-difference leaves an unknown
//! integration constant in `2λZ`, which is fixed by requiring the matching
//! difference of `r` to have (near) zero mean. The last constant is global
//! and cannot be observed through the fold; it is chosen so the recovered
//! signal is centered and stays within the amplitude bound `β_r`.

use crate::error::{invalid, Error, Result};
use crate::frontend::fold_with_index;
use crate::waveforms::BasebandSignal;
use std::f64::consts::E;
use std::ops::Sub;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnfoldingConfig {
    pub order: usize,
    pub lambda: f64,
    /// Amplitude bound, a multiple of `2λ` with `β_r >= ||r||_inf`.
    pub beta_r: f64,
    pub sample_interval: f64,
    /// One-sided bandwidth `Ω` in rad/s.
    pub bandwidth: f64,
    /// When set, enforces `T <= 1 / (2^α Ω e)`.
    pub oversampling_alpha: Option<u32>,
}

impl UnfoldingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(invalid("order", "L must be >= 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", "must be > 0"));
        }
        let ratio = self.beta_r / (2.0 * self.lambda);
        if !(self.beta_r > 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(invalid(
                "beta_r",
                format!(
                    "{} is not a positive multiple of 2λ = {}",
                    self.beta_r,
                    2.0 * self.lambda
                ),
            ));
        }
        if !(self.sample_interval > 0.0 && self.bandwidth > 0.0) {
            return Err(invalid("sampling", "T and Ω must be > 0"));
        }
        if let Some(alpha) = self.oversampling_alpha {
            let limit = 1.0 / (2f64.powi(alpha as i32) * self.bandwidth * E);
            if self.sample_interval > limit * (1.0 + 1e-12) {
                return Err(invalid(
                    "sample interval",
                    format!("T = {} exceeds 1/(2^α Ω e) = {limit}", self.sample_interval),
                ));
            }
        }
        Ok(())
    }

    /// `T Ω e`, the per-order contraction factor of `Δ` on bandlimited signals.
    pub fn contraction(&self) -> f64 {
        self.sample_interval * self.bandwidth * E
    }

    /// `β_r` rounded up to the lattice: the smallest multiple of `2λ` that is `>= peak`.
    pub fn lattice_bound(peak: f64, lambda: f64) -> f64 {
        let period = 2.0 * lambda;
        ((peak / period) - 1e-12).ceil().max(1.0) * period
    }

    /// Config with `β_r` from the signal peak and `L` from [`choose_order`].
    pub fn auto(lambda: f64, signal_peak: f64, sample_interval: f64, bandwidth: f64) -> Result<Self> {
        let mut cfg = Self {
            order: 1,
            lambda,
            beta_r: Self::lattice_bound(signal_peak, lambda),
            sample_interval,
            bandwidth,
            oversampling_alpha: None,
        };
        let zeta = (lambda / signal_peak).min(1.0);
        cfg.order = choose_order(&cfg, zeta)?;
        Ok(cfg)
    }
}

/// `L`-th order forward difference, `Δx[k] = x[k + 1] - x[k]` applied `L` times.
pub fn finite_difference<T>(x: &[T], order: usize) -> Result<Vec<T>>
where
    T: Copy + Sub<Output = T>,
{
    if order == 0 {
        return Err(invalid("order", "L must be >= 1"));
    }
    if x.len() <= order {
        return Err(Error::TooShort {
            needed: order + 1,
            got: x.len(),
        });
    }
    let mut d = x.to_vec();
    for _ in 0..order {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(d)
}

/// Running sum, `out[k] = sum_{m <= k} s[m]`.
pub fn anti_difference(s: &[f64]) -> Vec<f64> {
    s.iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Smallest `L` with `L >= ceil((ln λ - ln β_r) / ln(TΩe))` and `(TΩe)^L < ζ`.
pub fn choose_order(cfg: &UnfoldingConfig, zeta: f64) -> Result<usize> {
    let c = cfg.contraction();
    if c >= 1.0 {
        return Err(Error::Undersampled(c));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(invalid("zeta", format!("{zeta} outside (0, 1]")));
    }
    let mut order = if cfg.lambda >= cfg.beta_r {
        1
    } else {
        let bound = (cfg.lambda.ln() - cfg.beta_r.ln()) / c.ln();
        ((bound - 1e-9).ceil() as usize).max(1)
    };
    while c.powi(order as i32) >= zeta * (1.0 - 1e-12) {
        order += 1;
    }
    Ok(order)
}

/// Recovered rail plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RailRecovery {
    pub recovered: Vec<f64>,
    /// Residue `ε̂` with `recovered = folded + ε̂`.
    pub residue: Vec<f64>,
    /// Distance of each stage's integration constant from the lattice,
    /// in units of `λ`, ordered from stage `L - 1` down to stage 1.
    pub stage_residuals: Vec<f64>,
}

fn snap(x: f64, lambda: f64) -> f64 {
    let period = 2.0 * lambda;
    (x / period).round() * period
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unfolds one real rail of modulo samples.
pub fn unfold_rail(folded: &[f64], cfg: &UnfoldingConfig) -> Result<RailRecovery> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    let order = cfg.order;
    if folded.len() <= order {
        return Err(Error::TooShort {
            needed: order + 1,
            got: folded.len(),
        });
    }

    // Δ^L ε = M_λ(Δ^L y) - Δ^L y, already on the lattice.
    let top = finite_difference(folded, order)?;
    let mut residue: Vec<f64> = top
        .iter()
        .map(|&d| snap(fold_with_index(d, lambda).0 - d, lambda))
        .collect();

    let mut stage_residuals = Vec::with_capacity(order.saturating_sub(1));
    for stage in (0..order).rev() {
        // Anti-difference with a zero constant, then fix the constant.
        let mut next = Vec::with_capacity(residue.len() + 1);
        next.push(0.0);
        next.extend(anti_difference(&residue));

        let diff = if stage == 0 {
            folded.to_vec()
        } else {
            finite_difference(folded, stage)?
        };
        let partial: Vec<f64> = diff.iter().zip(&next).map(|(d, e)| d + e).collect();
        let offset = -mean(&partial);
        let constant = if stage == 0 {
            global_constant(&partial, offset, cfg)
        } else {
            let c = snap(offset, lambda);
            let residual = (offset - c).abs();
            if residual > lambda / 2.0 {
                return Err(Error::RecoveryFailure { stage, residual });
            }
            stage_residuals.push(residual / lambda);
            c
        };
        residue = next.iter().map(|e| snap(e + constant, lambda)).collect();
    }

    let recovered: Vec<f64> = folded.iter().zip(&residue).map(|(y, e)| y + e).collect();
    // Every stage can snap cleanly and still integrate a misread fold into
    // a drift; the amplitude bound catches that.
    let peak = recovered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > cfg.beta_r + lambda {
        return Err(Error::BoundExceeded {
            peak,
            bound: cfg.beta_r,
        });
    }
    Ok(RailRecovery {
        recovered,
        residue,
        stage_residuals,
    })
}

/// Picks the global `2λZ` offset: the one nearest the centering offset,
/// unless a neighbour is the only choice that respects `β_r`.
fn global_constant(partial: &[f64], offset: f64, cfg: &UnfoldingConfig) -> f64 {
    let lambda = cfg.lambda;
    let base = snap(offset, lambda);
    let peak_with = |c: f64| partial.iter().map(|v| (v + c).abs()).fold(0.0, f64::max);
    let limit = cfg.beta_r + lambda;
    if peak_with(base) <= limit {
        return base;
    }
    [base - 2.0 * lambda, base + 2.0 * lambda]
        .into_iter()
        .filter(|&c| peak_with(c) <= limit)
        .min_by(|a, b| (a - offset).abs().total_cmp(&(b - offset).abs()))
        .unwrap_or(base)
}

/// Unfolds both rails of a modulo-sampled signal.
pub fn usf_recover(folded: &BasebandSignal, cfg: &UnfoldingConfig) -> Result<BasebandSignal> {
    let i = unfold_rail(&folded.i(), cfg)?.recovered;
    let q = unfold_rail(&folded.q(), cfg)?.recovered;
    BasebandSignal::from_rails(&i, &q, folded.sample_interval(), folded.bandwidth())
}
