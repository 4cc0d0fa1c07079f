//! ADC front ends: the centered modulo fold, the mid-rise quantizer, the
//! modulo ADC and the conventional clipping ADC, plus closed-form and
//! Monte Carlo quantization-noise analysis.

use crate::error::{invalid, Error, Result};
use crate::waveforms::BasebandSignal;
use rand::Rng;
use std::f64::consts::E;

/// Splits `x` into `(M_λ(x), k)` with `x = M_λ(x) + 2λk` and
/// `M_λ(x) ∈ [-λ, λ)`.
///
/// Equivalent to `2λ(frac(x / 2λ + 1/2) - 1/2)`; computing the folded value
/// as `x - 2λk` keeps the residue an exact lattice multiple.
pub fn fold_with_index(x: f64, lambda: f64) -> (f64, i64) {
    let period = 2.0 * lambda;
    let mut k = (x / period + 0.5).floor();
    let mut folded = x - period * k;
    if folded >= lambda {
        folded -= period;
        k += 1.0;
    } else if folded < -lambda {
        folded += period;
        k -= 1.0;
    }
    (folded, k as i64)
}

/// Centered modulo `M_λ(x) ∈ [-λ, λ)`; odd multiples of `λ` map to `-λ`.
pub fn modulo_fold(x: f64, lambda: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("{lambda} must be > 0")));
    }
    Ok(fold_with_index(x, lambda).0)
}

/// Uniform mid-rise quantizer over `[-span/2, span/2)` with `2^bits` levels.
///
/// Levels sit at `-span/2 + (i + 1/2) q0`; inputs on a decision boundary go
/// to the upper level, and inputs outside the span saturate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    span: f64,
    bits: u32,
}

impl Quantizer {
    pub fn new(span: f64, bits: u32) -> Result<Self> {
        if !(span > 0.0 && span.is_finite()) {
            return Err(invalid("quantizer span", format!("{span} must be > 0")));
        }
        if !(1..=52).contains(&bits) {
            return Err(invalid("bits", format!("{bits} outside 1..=52")));
        }
        Ok(Self { span, bits })
    }

    /// `q0 = 2^-b ρ`.
    pub fn step(&self) -> f64 {
        self.span / self.levels() as f64
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn level(&self, index: u64) -> f64 {
        -self.span / 2.0 + (index as f64 + 0.5) * self.step()
    }

    pub fn quantize(&self, x: f64) -> f64 {
        let q0 = self.step();
        let idx = ((x + self.span / 2.0) / q0).floor();
        let idx = idx.clamp(0.0, (self.levels() - 1) as f64);
        self.level(idx as u64)
    }
}

/// Modulo ADC settings. `bits = None` bypasses quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuloAdcConfig {
    pub lambda: f64,
    pub bits: Option<u32>,
}

impl ModuloAdcConfig {
    pub fn new(lambda: f64, bits: Option<u32>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be > 0")));
        }
        if let Some(b) = bits {
            Quantizer::new(2.0 * lambda, b)?;
        }
        Ok(Self { lambda, bits })
    }

    /// The quantizer spans the folded range, `ρ_λ = 2λ`.
    pub fn dynamic_range(&self) -> f64 {
        2.0 * self.lambda
    }

    /// `ζ = λ / ||r||_inf` for a signal with the given peak.
    pub fn zeta(&self, signal_peak: f64) -> f64 {
        self.lambda / signal_peak
    }

    pub fn quantizer(&self) -> Option<Quantizer> {
        self.bits
            .map(|b| Quantizer::new(self.dynamic_range(), b).expect("validated at construction"))
    }
}

/// Quantizes `x` with the mid-rise quantizer spanning `cfg`'s folded range.
pub fn quantize_midrise(x: f64, cfg: &ModuloAdcConfig) -> f64 {
    match cfg.quantizer() {
        Some(q) => q.quantize(x),
        None => x,
    }
}

/// Folds then quantizes each rail independently.
pub fn modulo_adc(x: &BasebandSignal, cfg: &ModuloAdcConfig) -> BasebandSignal {
    let quantizer = cfg.quantizer();
    x.map_rails(|v| {
        let folded = fold_with_index(v, cfg.lambda).0;
        match quantizer {
            Some(q) => q.quantize(folded),
            None => folded,
        }
    })
}

/// Clips each rail to `[-span/2, span/2]` and mid-rise quantizes it.
pub fn conventional_adc(x: &BasebandSignal, span: f64, bits: u32) -> Result<BasebandSignal> {
    let q = Quantizer::new(span, bits)?;
    let half = span / 2.0;
    Ok(x.map_rails(|v| q.quantize(v.clamp(-half, half))))
}

/// Closed-form quantization-noise comparison of the conventional and modulo ADCs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantNoiseReport {
    pub bits: u32,
    pub zeta: f64,
    /// Conventional ADC step, `2^-b ρ` with `ρ = 2 ||r||_inf`.
    pub q0: f64,
    /// Modulo ADC step, `2^-b 2λ`.
    pub q0_modulo: f64,
    /// `q0² / 12`.
    pub sigma_q_sq: f64,
    /// `ζ² σ_q²`.
    pub sigma_qlambda_sq: f64,
    /// `b + log2(1/ζ)`.
    pub effective_bits: f64,
    /// `20 log10(1/ζ)`.
    pub sqnr_gain_db: f64,
    /// `-20 L log10(TΩe)`, present when the unfolding parameters are known.
    pub sqnr_gain_bound_db: Option<f64>,
}

/// Sampling parameters that cap the achievable SQNR gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBoundParams {
    pub order: usize,
    pub sample_interval: f64,
    pub bandwidth: f64,
}

pub fn quant_noise_analysis(
    cfg: &ModuloAdcConfig,
    signal_peak: f64,
    bound: Option<GainBoundParams>,
) -> Result<QuantNoiseReport> {
    if !(signal_peak > 0.0 && signal_peak.is_finite()) {
        return Err(invalid("signal peak", format!("{signal_peak} must be > 0")));
    }
    let bits = cfg
        .bits
        .ok_or_else(|| invalid("bits", "noise analysis needs a finite bit budget"))?;
    let zeta = cfg.zeta(signal_peak);
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(invalid("zeta", format!("{zeta} outside (0, 1]")));
    }
    let scale = 2f64.powi(-(bits as i32));
    let q0 = 2.0 * signal_peak * scale;
    let sigma_q_sq = q0 * q0 / 12.0;
    let sqnr_gain_bound_db = bound.map(|b| -20.0 * b.order as f64 * (b.sample_interval * b.bandwidth * E).log10());
    Ok(QuantNoiseReport {
        bits,
        zeta,
        q0,
        q0_modulo: cfg.dynamic_range() * scale,
        sigma_q_sq,
        sigma_qlambda_sq: zeta * zeta * sigma_q_sq,
        effective_bits: bits as f64 + (1.0 / zeta).log2(),
        sqnr_gain_db: 20.0 * (1.0 / zeta).log10(),
        sqnr_gain_bound_db,
    })
}

/// Measured quantization-noise variances of both converters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredQuantNoise {
    pub conventional: f64,
    pub modulo: f64,
}

impl MeasuredQuantNoise {
    /// `10 log10(conventional / modulo)`.
    pub fn gap_db(&self) -> f64 {
        10.0 * (self.conventional / self.modulo).log10()
    }
}

/// Monte Carlo quantization noise for inputs uniform over `[-peak, peak)`.
///
/// The conventional ADC spans the full peak-to-peak range; the modulo ADC
/// folds at `λ = ζ peak` and quantizes `[-λ, λ)` with the same bit budget.
pub fn measure_quant_noise(
    peak: f64,
    zeta: f64,
    bits: u32,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<MeasuredQuantNoise> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(invalid("zeta", format!("{zeta} outside (0, 1]")));
    }
    if samples == 0 {
        return Err(Error::Empty("sample count"));
    }
    let conv = Quantizer::new(2.0 * peak, bits)?;
    let lambda = zeta * peak;
    let modq = Quantizer::new(2.0 * lambda, bits)?;
    let (mut conv_acc, mut mod_acc) = (0.0, 0.0);
    for _ in 0..samples {
        let r: f64 = rng.random_range(-peak..peak);
        let e = conv.quantize(r) - r;
        conv_acc += e * e;
        let folded = fold_with_index(r, lambda).0;
        let e = modq.quantize(folded) - folded;
        mod_acc += e * e;
    }
    Ok(MeasuredQuantNoise {
        conventional: conv_acc / samples as f64,
        modulo: mod_acc / samples as f64,
    })
}
