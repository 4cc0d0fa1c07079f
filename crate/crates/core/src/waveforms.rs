//! Baseband signal model of the full-duplex receiver.
//!
//! Covers QPSK symbol mapping, pulse shaping, the periodic Fourier-series
//! pilot used for SI channel sounding, single-path channels and the
//! composition of the received mixture `z = sqrt(p_u) SoI + sqrt(p_d) SI + n`.
//!
//! Delays are circular over the record length. For the periodic pilot this
//! is the exact Fourier-domain shift; for data records it models a block with
//! a cyclic extension, and the same convention is used when the SI is
//! reconstructed, so estimation and cancellation stay consistent.

use crate::dsp;
use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Uniformly sampled complex baseband waveform.
///
/// The in-phase and quadrature rails are the real and imaginary parts of the
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    samples: Vec<Complex64>,
    sample_interval: f64,
    bandwidth: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, sample_interval: f64, bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("signal"));
        }
        if !(sample_interval > 0.0 && sample_interval.is_finite()) {
            return Err(invalid("sample interval", format!("{sample_interval} must be > 0")));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid("bandwidth", format!("{bandwidth} must be > 0")));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            samples,
            sample_interval,
            bandwidth,
        })
    }

    /// Builds a signal from separate I and Q rails.
    pub fn from_rails(i: &[f64], q: &[f64], sample_interval: f64, bandwidth: f64) -> Result<Self> {
        if i.len() != q.len() {
            return Err(Error::LengthMismatch {
                left: i.len(),
                right: q.len(),
            });
        }
        let samples = i.iter().zip(q).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Self::new(samples, sample_interval, bandwidth)
    }

    pub fn from_real(x: &[f64], sample_interval: f64, bandwidth: f64) -> Result<Self> {
        let samples = x.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        Self::new(samples, sample_interval, bandwidth)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    /// One-sided bandwidth in rad/s.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Record duration `len * T`, which is also the period used for circular delays.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.sample_interval
    }

    pub fn i(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.re).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.im).collect()
    }

    /// Mean power `mean |x|^2`.
    pub fn power(&self) -> f64 {
        dsp::mean_power(&self.samples)
    }

    /// Largest absolute value over both rails, i.e. the per-rail `||r||_inf`.
    pub fn rail_peak(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.re.abs().max(s.im.abs()))
            .fold(0.0, f64::max)
    }

    /// Same timing metadata, new samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(samples, self.sample_interval, self.bandwidth)
    }

    /// Applies `f` to each rail independently.
    pub fn map_rails(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let samples = self.samples.iter().map(|s| Complex64::new(f(s.re), f(s.im))).collect();
        Self {
            samples,
            sample_interval: self.sample_interval,
            bandwidth: self.bandwidth,
        }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        self.map_rails(|v| v * gain)
    }

    /// Sample-wise sum. Fails on length mismatch.
    pub fn add(&self, other: &BasebandSignal) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Sample-wise difference. Fails on length mismatch.
    pub fn sub(&self, other: &BasebandSignal) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &BasebandSignal, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            samples,
            sample_interval: self.sample_interval,
            bandwidth: self.bandwidth,
        })
    }
}

/// Gray-mapped unit-energy QPSK. Bit pairs `(b0, b1)` map to
/// `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn qpsk_modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::OddBitCount(bits.len()));
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidBit(b));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|pair| {
            let re = 1.0 - 2.0 * pair[0] as f64;
            let im = 1.0 - 2.0 * pair[1] as f64;
            Complex64::new(re, im) * FRAC_1_SQRT_2
        })
        .collect())
}

/// Draws `count` uniform random bits.
pub fn random_bits(count: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..count).map(|_| rng.random_range(0..2u8)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    /// Box kernel of one symbol duration.
    Rectangular,
    /// Root-raised-cosine truncated to `span` symbols.
    RootRaisedCosine { rolloff: f64, span: usize },
}

/// Pulse-shaping kernel plus the symbol period it is defined against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub shape: PulseShape,
    pub symbol_period: f64,
}

impl Default for Pulse {
    fn default() -> Self {
        Self {
            shape: PulseShape::RootRaisedCosine { rolloff: 0.25, span: 8 },
            symbol_period: 1.0,
        }
    }
}

impl Pulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_period > 0.0) {
            return Err(invalid("symbol period", "must be > 0"));
        }
        if let PulseShape::RootRaisedCosine { rolloff, span } = self.shape {
            if !(0.0..=1.0).contains(&rolloff) {
                return Err(invalid("rolloff", format!("{rolloff} outside [0, 1]")));
            }
            if span == 0 {
                return Err(invalid("span", "must be >= 1 symbol"));
            }
        }
        Ok(())
    }

    /// Kernel samples at `samples_per_symbol` per symbol, scaled so that
    /// `sum h^2 = samples_per_symbol` (unit-energy symbols give unit power).
    pub fn taps(&self, samples_per_symbol: usize) -> Vec<f64> {
        match self.shape {
            PulseShape::Rectangular => vec![1.0; samples_per_symbol],
            PulseShape::RootRaisedCosine { rolloff, span } => {
                let len = span * samples_per_symbol + 1;
                let mid = (len - 1) as f64 / 2.0;
                let mut taps: Vec<f64> = (0..len)
                    .map(|i| rrc_value((i as f64 - mid) / samples_per_symbol as f64, rolloff))
                    .collect();
                let energy: f64 = taps.iter().map(|h| h * h).sum();
                let scale = (samples_per_symbol as f64 / energy).sqrt();
                taps.iter_mut().for_each(|h| *h *= scale);
                taps
            }
        }
    }

    /// One-sided bandwidth in rad/s: `pi (1 + beta) / T_sym` for RRC, the
    /// first spectral null `2 pi / T_sym` for the box kernel.
    pub fn bandwidth(&self) -> f64 {
        match self.shape {
            PulseShape::Rectangular => 2.0 * PI / self.symbol_period,
            PulseShape::RootRaisedCosine { rolloff, .. } => PI * (1.0 + rolloff) / self.symbol_period,
        }
    }
}

/// Root-raised-cosine impulse response at `t` symbol periods (unnormalized).
fn rrc_value(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Shapes a symbol train: `x[k] = sum_n c[n] h[k - n sps]`.
///
/// The output has `(N - 1) sps + len(h)` samples, i.e. the full support of
/// the last symbol's pulse.
pub fn pulse_shape(symbols: &[Complex64], samples_per_symbol: usize, pulse: &Pulse) -> Result<BasebandSignal> {
    if symbols.is_empty() {
        return Err(Error::Empty("symbol sequence"));
    }
    if samples_per_symbol == 0 {
        return Err(invalid("samples per symbol", "must be >= 1"));
    }
    pulse.validate()?;
    let taps = pulse.taps(samples_per_symbol);
    let len = (symbols.len() - 1) * samples_per_symbol + taps.len();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (n, &c) in symbols.iter().enumerate() {
        let start = n * samples_per_symbol;
        for (slot, &h) in out[start..start + taps.len()].iter_mut().zip(&taps) {
            *slot += c * h;
        }
    }
    BasebandSignal::new(out, pulse.symbol_period / samples_per_symbol as f64, pulse.bandwidth())
}

/// Number of whole symbols carried by a shaped record of `len` samples.
pub fn symbol_count(len: usize, samples_per_symbol: usize, pulse: &Pulse) -> usize {
    let taps = pulse.taps(samples_per_symbol).len();
    if len < taps {
        0
    } else {
        (len - taps) / samples_per_symbol + 1
    }
}

/// Periodic bandlimited pilot described by its Fourier-series coefficients.
///
/// `coeffs[p + P]` holds the coefficient of harmonic `p` for `|p| <= P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSpec {
    period: f64,
    coeffs: Vec<Complex64>,
    sample_count: usize,
}

impl PilotSpec {
    pub fn new(period: f64, coeffs: Vec<Complex64>, sample_count: usize) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid("pilot period", "must be > 0"));
        }
        if coeffs.len().is_multiple_of(2) || coeffs.len() < 3 {
            return Err(invalid(
                "pilot coefficients",
                format!("need 2P + 1 entries with P >= 1, got {}", coeffs.len()),
            ));
        }
        let half = (coeffs.len() - 1) / 2;
        if sample_count < 2 * half + 1 {
            return Err(invalid(
                "pilot sample count",
                format!("K = {sample_count} < 2P + 1 = {}", 2 * half + 1),
            ));
        }
        Ok(Self {
            period,
            coeffs,
            sample_count,
        })
    }

    /// Real pilot with unit-magnitude, seeded random-phase coefficients,
    /// scaled to unit mean power. `γ_0` is a real `±1` before scaling.
    pub fn random(period: f64, half_bandwidth: usize, sample_count: usize, seed: u64) -> Result<Self> {
        if half_bandwidth == 0 {
            return Err(invalid("pilot half-bandwidth", "P must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / ((2 * half_bandwidth + 1) as f64).sqrt();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * half_bandwidth + 1];
        coeffs[half_bandwidth] = Complex64::new(if rng.random::<bool>() { scale } else { -scale }, 0.0);
        for p in 1..=half_bandwidth {
            let c = Complex64::from_polar(scale, rng.random_range(0.0..2.0 * PI));
            coeffs[half_bandwidth + p] = c;
            coeffs[half_bandwidth - p] = c.conj();
        }
        Self::new(period, coeffs, sample_count)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Fundamental `ω0 = 2π / T_p`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// `P`, the largest harmonic index.
    pub fn half_bandwidth(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// `T = T_p / K`.
    pub fn sample_interval(&self) -> f64 {
        self.period / self.sample_count as f64
    }

    pub fn bandwidth(&self) -> f64 {
        self.half_bandwidth() as f64 * self.fundamental()
    }

    /// Coefficient of harmonic `p`; zero outside `|p| <= P`.
    pub fn coeff(&self, p: i64) -> Complex64 {
        let half = self.half_bandwidth() as i64;
        if p.abs() > half {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(p + half) as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// True when `γ_{-p} = conj(γ_p)` for all `p`, i.e. the pilot is real.
    pub fn is_real(&self) -> bool {
        let half = self.half_bandwidth() as i64;
        let tol = 1e-12 * self.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
        (0..=half).all(|p| (self.coeff(-p) - self.coeff(p).conj()).norm() <= tol)
    }

    /// Evaluates the Fourier series at time `t`.
    pub fn evaluate(&self, t: f64) -> Complex64 {
        let w0 = self.fundamental();
        let half = self.half_bandwidth() as i64;
        (-half..=half)
            .map(|p| self.coeff(p) * Complex64::from_polar(1.0, p as f64 * w0 * t))
            .sum()
    }
}

/// Samples one period of the pilot on `T = T_p / K`.
pub fn generate_pilot(spec: &PilotSpec) -> Result<BasebandSignal> {
    generate_pilot_at(spec, spec.sample_interval())
}

/// Samples one period of the pilot on a caller-supplied grid; `K T` must
/// equal `T_p`.
pub fn generate_pilot_at(spec: &PilotSpec, sample_interval: f64) -> Result<BasebandSignal> {
    let sampled = spec.sample_count as f64 * sample_interval;
    if (sampled - spec.period).abs() > 1e-9 * spec.period {
        return Err(Error::PeriodMismatch {
            sampled,
            period: spec.period,
        });
    }
    let real = spec.is_real();
    let samples = (0..spec.sample_count)
        .map(|k| {
            let v = spec.evaluate(k as f64 * sample_interval);
            if real {
                Complex64::new(v.re, 0.0)
            } else {
                v
            }
        })
        .collect();
    BasebandSignal::new(samples, sample_interval, spec.bandwidth())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    SelfInterference,
    Uplink,
}

/// Single-path channel `h(t) = A δ(t - τ)`, with `τ` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseChannel {
    pub amplitude: f64,
    pub delay: f64,
    pub kind: ChannelKind,
}

impl SparseChannel {
    pub fn new(amplitude: f64, delay: f64, kind: ChannelKind) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(invalid("channel amplitude", format!("{amplitude} must be > 0")));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(invalid("channel delay", format!("{delay} must be >= 0")));
        }
        Ok(Self { amplitude, delay, kind })
    }

    pub fn self_interference(amplitude: f64, delay: f64) -> Result<Self> {
        Self::new(amplitude, delay, ChannelKind::SelfInterference)
    }

    /// Flat, known uplink gain with zero delay.
    pub fn uplink(gain: f64) -> Result<Self> {
        Self::new(gain, 0.0, ChannelKind::Uplink)
    }

    /// Frequency response at harmonic `p` of a fundamental `w0`.
    pub fn response(&self, p: i64, w0: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, -(p as f64) * w0 * self.delay)
    }
}

/// `out[k] = sqrt(power) A x(kT - τ)`, delayed circularly over the record.
pub fn apply_sparse_channel(x: &BasebandSignal, ch: &SparseChannel, power: f64) -> Result<BasebandSignal> {
    if !(power >= 0.0) {
        return Err(invalid("power", format!("{power} must be >= 0")));
    }
    let period = x.duration();
    if !(ch.delay >= 0.0 && ch.delay < period) {
        return Err(Error::DelayOutOfRange {
            delay: ch.delay,
            period,
        });
    }
    let gain = power.sqrt() * ch.amplitude;
    let delayed = dsp::circular_delay(x.samples(), ch.delay / x.sample_interval());
    x.with_samples(delayed.into_iter().map(|v| v * gain).collect())
}

/// Power settings of the received mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub p_u: f64,
    /// SI transmit power; ignored when `sir_db` is set.
    pub p_d: f64,
    /// `10 log10(P_SoI / P_SI)`. When set, the SI gain is chosen to meet it.
    pub sir_db: Option<f64>,
    /// `10 log10(P_SoI / σ²)`. `None` means noiseless.
    pub snr_db: Option<f64>,
    /// Power the SNR is referenced to; defaults to the measured SoI power.
    /// Needed for pilot phases where no SoI is transmitted.
    pub reference_power: Option<f64>,
    pub rng_seed: u64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            p_u: 1.0,
            p_d: 1.0,
            sir_db: None,
            snr_db: None,
            reference_power: None,
            rng_seed: 0,
        }
    }
}

/// The received mixture with its individual components kept for scoring.
#[derive(Debug, Clone)]
pub struct ReceivedMixture {
    pub total: BasebandSignal,
    pub soi: BasebandSignal,
    pub si: BasebandSignal,
    pub noise: BasebandSignal,
    /// Complex noise variance `σ²` actually used.
    pub noise_variance: f64,
}

/// `z = sqrt(p_u) soi + sqrt(p_d) si + n`.
pub fn compose_received(soi: &BasebandSignal, si: &BasebandSignal, cfg: &MixtureConfig) -> Result<BasebandSignal> {
    compose_received_parts(soi, si, cfg).map(|m| m.total)
}

pub fn compose_received_parts(
    soi: &BasebandSignal,
    si: &BasebandSignal,
    cfg: &MixtureConfig,
) -> Result<ReceivedMixture> {
    if soi.len() != si.len() {
        return Err(Error::LengthMismatch {
            left: soi.len(),
            right: si.len(),
        });
    }
    if (soi.sample_interval() - si.sample_interval()).abs() > 1e-12 * soi.sample_interval() {
        return Err(invalid("sample interval", "SoI and SI grids differ"));
    }
    if !(cfg.p_u >= 0.0 && cfg.p_d >= 0.0) {
        return Err(invalid("transmit power", "must be >= 0"));
    }
    let soi_part = soi.scaled(cfg.p_u.sqrt());
    let soi_power = soi_part.power();
    let si_gain = match cfg.sir_db {
        Some(sir) => {
            let si_power = si.power();
            if si_power == 0.0 {
                0.0
            } else {
                (soi_power * 10f64.powf(-sir / 10.0) / si_power).sqrt()
            }
        }
        None => cfg.p_d.sqrt(),
    };
    let si_part = si.scaled(si_gain);

    let reference = cfg.reference_power.unwrap_or(soi_power);
    let noise_variance = match cfg.snr_db {
        Some(snr) => reference * 10f64.powf(-snr / 10.0),
        None => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let noise = complex_gaussian(soi.len(), noise_variance, &mut rng);
    let noise = soi.with_samples(noise)?;
    let total = soi_part.add(&si_part)?.add(&noise)?;
    Ok(ReceivedMixture {
        total,
        soi: soi_part,
        si: si_part,
        noise,
        noise_variance,
    })
}

/// Circular complex Gaussian samples with total variance `variance`.
pub fn complex_gaussian(len: usize, variance: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    if variance == 0.0 {
        return vec![Complex64::new(0.0, 0.0); len];
    }
    let sigma = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sig(x: Vec<Complex64>) -> BasebandSignal {
        BasebandSignal::new(x, 1.0, 1.0).unwrap()
    }

    #[test]
    fn qpsk_gray_mapping() {
        let s = qpsk_modulate(&[0, 0]).unwrap();
        assert!((s[0] - c(1.0, 1.0) * FRAC_1_SQRT_2).norm() < 1e-15);
        let s = qpsk_modulate(&[0, 0, 1, 1]).unwrap();
        assert!((s[1] - c(-1.0, -1.0) * FRAC_1_SQRT_2).norm() < 1e-15);
        assert_eq!(qpsk_modulate(&[0, 1, 1]), Err(Error::OddBitCount(3)));
        assert_eq!(qpsk_modulate(&[0, 2]), Err(Error::InvalidBit(2)));
    }

    #[test]
    fn qpsk_unit_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bits = random_bits(1000, &mut rng);
        let s = qpsk_modulate(&bits).unwrap();
        assert_eq!(s.len(), 500);
        let p = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((p - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rectangular_pulse_replicates() {
        let pulse = Pulse {
            shape: PulseShape::Rectangular,
            symbol_period: 1.0,
        };
        let x = pulse_shape(&[c(1.0, 0.0)], 4, &pulse).unwrap();
        assert_eq!(x.samples(), &[c(1.0, 0.0); 4]);
        assert!((x.sample_interval() - 0.25).abs() < 1e-15);
        assert_eq!(pulse_shape(&[], 4, &pulse), Err(Error::Empty("symbol sequence")));
    }

    #[test]
    fn pulse_shaping_is_linear() {
        let pulse = Pulse::default();
        let a = [c(1.0, 0.5), c(0.0, 0.0)];
        let b = [c(0.0, 0.0), c(-0.3, 1.0)];
        let both = [c(1.0, 0.5), c(-0.3, 1.0)];
        let xa = pulse_shape(&a, 6, &pulse).unwrap();
        let xb = pulse_shape(&b, 6, &pulse).unwrap();
        let xab = pulse_shape(&both, 6, &pulse).unwrap();
        let sum = xa.add(&xb).unwrap();
        for (u, v) in sum.samples().iter().zip(xab.samples()) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn rrc_taps_energy_and_nyquist() {
        let pulse = Pulse::default();
        let sps = 8;
        let h = pulse.taps(sps);
        let e: f64 = h.iter().map(|v| v * v).sum();
        assert!((e - sps as f64).abs() < 1e-9);
        // RRC * RRC is a raised cosine: near-zero ISI at symbol spacings.
        let n = h.len();
        let rc: Vec<f64> = (0..2 * n - 1)
            .map(|k| (0..n).filter(|&i| k >= i && k - i < n).map(|i| h[i] * h[k - i]).sum())
            .collect();
        let peak = rc[n - 1];
        for m in 1..4 {
            assert!(rc[n - 1 + m * sps].abs() / peak < 2e-2);
        }
    }

    #[test]
    fn single_tone_pilot_is_cosine() {
        let coeffs = vec![c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)];
        let spec = PilotSpec::new(8.0, coeffs, 8).unwrap();
        let x = generate_pilot(&spec).unwrap();
        for (k, v) in x.samples().iter().enumerate() {
            let want = (2.0 * PI * k as f64 / 8.0).cos();
            assert!((v.re - want).abs() < 1e-14);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn zero_pilot_is_zero() {
        let spec = PilotSpec::new(1.0, vec![c(0.0, 0.0); 5], 9).unwrap();
        let x = generate_pilot(&spec).unwrap();
        assert!(x.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn pilot_period_mismatch() {
        let spec = PilotSpec::random(1.0, 2, 16, 3).unwrap();
        assert!(matches!(
            generate_pilot_at(&spec, 0.07),
            Err(Error::PeriodMismatch { .. })
        ));
        assert!(generate_pilot_at(&spec, 1.0 / 16.0).is_ok());
    }

    #[test]
    fn pilot_spec_invariants() {
        assert!(PilotSpec::new(1.0, vec![c(1.0, 0.0); 5], 4).is_err());
        assert!(PilotSpec::new(1.0, vec![c(1.0, 0.0); 4], 9).is_err());
        let spec = PilotSpec::random(2.0, 3, 32, 11).unwrap();
        assert!(spec.is_real());
        assert_eq!(spec.coeff(4), c(0.0, 0.0));
        let power: f64 = spec.coeffs().iter().map(|v| v.norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_and_integer_channels() {
        let x = sig((0..8).map(|k| c(k as f64, -(k as f64))).collect());
        let id = SparseChannel::self_interference(1.0, 0.0).unwrap();
        assert_eq!(apply_sparse_channel(&x, &id, 1.0).unwrap(), x);
        let shift = SparseChannel::self_interference(1.0, 2.0).unwrap();
        let y = apply_sparse_channel(&x, &shift, 1.0).unwrap();
        for k in 0..8 {
            assert_eq!(y.samples()[k], x.samples()[(k + 6) % 8]);
        }
        let late = SparseChannel::self_interference(1.0, 8.0).unwrap();
        assert!(matches!(
            apply_sparse_channel(&x, &late, 1.0),
            Err(Error::DelayOutOfRange { .. })
        ));
    }

    #[test]
    fn fractional_delay_matches_fourier_series() {
        let spec = PilotSpec::random(4.0, 5, 32, 9).unwrap();
        let x = generate_pilot(&spec).unwrap();
        let t = spec.sample_interval();
        let ch = SparseChannel::self_interference(3.162, 1.3 * t).unwrap();
        let y = apply_sparse_channel(&x, &ch, 1.0).unwrap();
        let w0 = spec.fundamental();
        for (k, v) in y.samples().iter().enumerate() {
            let want: Complex64 = (-5..=5)
                .map(|p| spec.coeff(p) * ch.response(p, w0) * Complex64::from_polar(1.0, p as f64 * w0 * k as f64 * t))
                .sum();
            assert!((v - want).norm() < 1e-12, "k={k}: {v} vs {want}");
        }
    }

    #[test]
    fn noiseless_mixture_is_sum() {
        let a = sig(vec![c(1.0, 2.0), c(3.0, -1.0)]);
        let b = sig(vec![c(0.5, 0.0), c(0.0, 0.5)]);
        let z = compose_received(&a, &b, &MixtureConfig::default()).unwrap();
        assert_eq!(z, a.add(&b).unwrap());
        let short = sig(vec![c(1.0, 0.0)]);
        assert!(matches!(
            compose_received(&a, &short, &MixtureConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mixture_is_seeded() {
        let a = sig((0..64).map(|k| c((k as f64).sin(), 0.0)).collect());
        let b = sig((0..64).map(|k| c(0.0, (k as f64).cos())).collect());
        let cfg = MixtureConfig {
            snr_db: Some(10.0),
            sir_db: Some(-20.0),
            rng_seed: 5,
            ..Default::default()
        };
        let z1 = compose_received(&a, &b, &cfg).unwrap();
        let z2 = compose_received(&a, &b, &cfg).unwrap();
        assert_eq!(z1, z2);
    }
}
