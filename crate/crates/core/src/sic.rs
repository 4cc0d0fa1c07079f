//! Digital SI cancellation, the NLMS baseline, QPSK detection and error
//! metrics.

use crate::dsp;
use crate::error::{invalid, Error, Result};
use crate::waveforms::{BasebandSignal, Pulse, SparseChannel};
use num_complex::Complex64;

/// SI replica `Â γ(kT - τ̂)` from the known transmit reference.
pub fn reconstruct_si(ch: &SparseChannel, reference: &BasebandSignal) -> Result<BasebandSignal> {
    let shift = ch.delay / reference.sample_interval();
    let delayed = dsp::circular_delay(reference.samples(), shift);
    reference.with_samples(delayed.into_iter().map(|v| v * ch.amplitude).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SicResult {
    pub si_hat: BasebandSignal,
    pub soi: BasebandSignal,
    /// Power of `si_hat - si` in dB; needs the true SI.
    pub residual_si_power_db: Option<f64>,
    /// `10 log10(P_si / P_residual)`; needs the true SI.
    pub sic_db: Option<f64>,
}

/// Subtracts the SI replica. With the true SI supplied, also reports how
/// much of it was removed.
pub fn cancel_si(
    recovered: &BasebandSignal,
    si_hat: &BasebandSignal,
    si_truth: Option<&BasebandSignal>,
) -> Result<SicResult> {
    let soi = recovered.sub(si_hat)?;
    let (residual_si_power_db, sic_db) = match si_truth {
        Some(si) => {
            let residual = si.sub(si_hat)?.power();
            let before = si.power();
            let residual_db = 10.0 * residual.log10();
            let sic = if before > 0.0 {
                Some(10.0 * (before / residual).log10())
            } else {
                None
            };
            (Some(residual_db), sic)
        }
        None => (None, None),
    };
    Ok(SicResult {
        si_hat: si_hat.clone(),
        soi,
        residual_si_power_db,
        sic_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmsConfig {
    pub order: usize,
    pub step: f64,
    pub regularizer: f64,
}

impl Default for NlmsConfig {
    fn default() -> Self {
        Self {
            order: 32,
            step: 0.5,
            regularizer: 1e-6,
        }
    }
}

impl NlmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(invalid("NLMS order", "must be >= 1"));
        }
        if !(0.0..=2.0).contains(&self.step) {
            return Err(invalid("NLMS step", format!("{} outside [0, 2]", self.step)));
        }
        if !(self.regularizer >= 0.0) {
            return Err(invalid("NLMS regularizer", "must be >= 0"));
        }
        Ok(())
    }
}

/// Complex NLMS run once over the record; returns the a-priori filter
/// output `w^H x[k]` as the SI estimate.
pub fn nlms_estimate(
    reference: &BasebandSignal,
    received: &BasebandSignal,
    cfg: &NlmsConfig,
) -> Result<BasebandSignal> {
    cfg.validate()?;
    if reference.len() != received.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: received.len(),
        });
    }
    let x = reference.samples();
    let d = received.samples();
    let mut w = vec![Complex64::new(0.0, 0.0); cfg.order];
    let mut out = Vec::with_capacity(x.len());
    let mut energy = 0.0;
    for k in 0..x.len() {
        // Sliding-window energy of the regressor [x[k], ..., x[k - order + 1]].
        energy += x[k].norm_sqr();
        if k >= cfg.order {
            energy -= x[k - cfg.order].norm_sqr();
        }
        let taps = cfg.order.min(k + 1);
        let y: Complex64 = (0..taps).map(|i| w[i].conj() * x[k - i]).sum();
        let e = d[k] - y;
        let gain = cfg.step / (cfg.regularizer + energy.max(0.0));
        if gain.is_finite() && gain > 0.0 {
            for i in 0..taps {
                w[i] += x[k - i] * e.conj() * gain;
            }
        }
        out.push(y);
    }
    received.with_samples(out)
}

/// Matched filter, symbol-rate sampling, flat-channel equalization and
/// hard QPSK decisions. Two bits per whole symbol in the record.
pub fn qpsk_detect(
    soi: &BasebandSignal,
    uplink: &SparseChannel,
    samples_per_symbol: usize,
    pulse: &Pulse,
) -> Result<Vec<u8>> {
    if samples_per_symbol == 0 {
        return Err(invalid("samples per symbol", "must be >= 1"));
    }
    pulse.validate()?;
    let taps = pulse.taps(samples_per_symbol);
    let x = soi.samples();
    let symbols = crate::waveforms::symbol_count(x.len(), samples_per_symbol, pulse);
    let gain = uplink.response(0, 0.0);
    let mut bits = Vec::with_capacity(2 * symbols);
    for n in 0..symbols {
        let start = n * samples_per_symbol;
        let z: Complex64 =
            taps.iter().zip(&x[start..]).map(|(h, v)| v * *h).sum::<Complex64>() / samples_per_symbol as f64 / gain;
        bits.push(u8::from(z.re < 0.0));
        bits.push(u8::from(z.im < 0.0));
    }
    Ok(bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet {
    pub mse: f64,
    pub nmse: f64,
    pub ber: Option<f64>,
    pub sic_db: Option<f64>,
}

pub fn mse(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimate.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / truth.len() as f64)
}

pub fn nmse(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    let err = mse(estimate, truth)?;
    let energy = dsp::mean_power(truth);
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(err / energy)
}

pub fn bit_error_rate(est: &[u8], truth: &[u8]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("bit sequence"));
    }
    let errors = est.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

/// MSE and NMSE of a waveform estimate, plus BER when both bit sequences
/// are supplied.
pub fn compute_metrics(estimate: &[Complex64], truth: &[Complex64], bits: Option<(&[u8], &[u8])>) -> Result<MetricSet> {
    let ber = match bits {
        Some((est, want)) => Some(bit_error_rate(est, want)?),
        None => None,
    };
    Ok(MetricSet {
        mse: mse(estimate, truth)?,
        nmse: nmse(estimate, truth)?,
        ber,
        sic_db: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::{complex_gaussian, pulse_shape, qpsk_modulate, random_bits};
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(x: Vec<Complex64>) -> BasebandSignal {
        BasebandSignal::new(x, 0.125, 1.0).unwrap()
    }

    fn noise(len: usize, var: f64, seed: u64) -> Vec<Complex64> {
        complex_gaussian(len, var, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn identity_and_scaling() {
        let x = sig(noise(64, 1.0, 1));
        let id = reconstruct_si(&SparseChannel::self_interference(1.0, 0.0).unwrap(), &x).unwrap();
        assert_eq!(id.samples(), x.samples());
        let twice = reconstruct_si(&SparseChannel::self_interference(2.0, 0.0).unwrap(), &x).unwrap();
        for (a, b) in twice.samples().iter().zip(x.samples()) {
            assert!((a - 2.0 * b).norm() < 1e-15);
        }
    }

    #[test]
    fn perfect_replica_leaves_soi() {
        let soi = sig(noise(32, 1.0, 2));
        let si = sig(noise(32, 100.0, 3));
        let r = soi.add(&si).unwrap();
        let res = cancel_si(&r, &si, Some(&si)).unwrap();
        for (a, b) in res.soi.samples().iter().zip(soi.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(res.residual_si_power_db, Some(f64::NEG_INFINITY));
        assert_eq!(res.sic_db, Some(f64::INFINITY));
    }

    #[test]
    fn cancellation_is_linear() {
        let r = sig(noise(16, 1.0, 4));
        let s1 = sig(noise(16, 1.0, 5));
        let s2 = sig(noise(16, 1.0, 6));
        let once = cancel_si(&r, &s1.add(&s2).unwrap(), None).unwrap().soi;
        let twice = cancel_si(&cancel_si(&r, &s1, None).unwrap().soi, &s2, None)
            .unwrap()
            .soi;
        for (a, b) in once.samples().iter().zip(twice.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = sig(noise(8, 1.0, 1));
        let b = sig(noise(9, 1.0, 1));
        assert!(matches!(cancel_si(&a, &b, None), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn nlms_without_step_outputs_zero() {
        let x = sig(noise(100, 1.0, 7));
        let cfg = NlmsConfig {
            step: 0.0,
            ..Default::default()
        };
        let y = nlms_estimate(&x, &x, &cfg).unwrap();
        assert!(y.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn nlms_approaches_wiener_solution() {
        let n = 20_000;
        let order = 8;
        let x = noise(n, 1.0, 8);
        let mut d: Vec<Complex64> = (0..n)
            .map(|k| {
                if k >= 3 {
                    x[k - 3] * 3.0
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let si_power = 9.0;
        let v = noise(n, si_power * 1e-5, 9);
        d.iter_mut().zip(&v).for_each(|(a, b)| *a += b);

        // Wiener filter of the same length, solved from sample statistics.
        let reg = |k: usize| DVector::from_fn(order, |i, _| if k >= i { x[k - i] } else { Complex64::new(0.0, 0.0) });
        let mut r = DMatrix::<Complex64>::zeros(order, order);
        let mut p = DVector::<Complex64>::zeros(order);
        for (k, dk) in d.iter().enumerate().take(n) {
            let u = reg(k);
            r += &u * u.adjoint();
            p += &u * dk.conj();
        }
        let w = r.lu().solve(&p).unwrap();
        let wiener: Vec<Complex64> = (0..n).map(|k| (w.adjoint() * reg(k))[(0, 0)]).collect();

        let est = nlms_estimate(
            &sig(x.clone()),
            &sig(d.clone()),
            &NlmsConfig {
                order,
                ..Default::default()
            },
        )
        .unwrap();
        let tail = n / 2..n;
        let nlms_mse = mse(&est.samples()[tail.clone()], &d[tail.clone()]).unwrap();
        let wiener_mse = mse(&wiener[tail.clone()], &d[tail]).unwrap();
        assert!(10.0 * (nlms_mse / si_power).log10() < -30.0, "NLMS MSE {nlms_mse}");
        assert!(nlms_mse < 2.0 * wiener_mse, "NLMS {nlms_mse} vs Wiener {wiener_mse}");
    }

    #[test]
    fn clean_loopback_has_no_bit_errors() {
        let bits = random_bits(400, &mut ChaCha8Rng::seed_from_u64(10));
        let pulse = Pulse::default();
        let x = pulse_shape(&qpsk_modulate(&bits).unwrap(), 8, &pulse).unwrap();
        let uplink = SparseChannel::uplink(0.3).unwrap();
        let rx = x.scaled(0.3);
        let got = qpsk_detect(&rx, &uplink, 8, &pulse).unwrap();
        assert_eq!(bit_error_rate(&got, &bits).unwrap(), 0.0);
    }

    #[test]
    fn metric_anchors() {
        let t = noise(50, 1.0, 11);
        let m = compute_metrics(&t, &t, Some((&[0, 1], &[0, 1]))).unwrap();
        assert_eq!((m.mse, m.nmse, m.ber), (0.0, 0.0, Some(0.0)));
        let zero = vec![Complex64::new(0.0, 0.0); 50];
        assert!((nmse(&zero, &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmse(&t, &zero), Err(Error::ZeroEnergy));
    }

    #[test]
    fn independent_bits_disagree_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_bits(10_000, &mut rng);
        let b = random_bits(10_000, &mut rng);
        let ber = bit_error_rate(&a, &b).unwrap();
        assert!((ber - 0.5).abs() < 0.02, "{ber}");
    }
}
