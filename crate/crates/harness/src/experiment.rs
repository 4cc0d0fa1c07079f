//! One trial = pilot phase (SI channel estimation from a folded pilot) plus
//! data phase (modulo ADC, unfolding, SIC, detection), scored against the
//! simulator's ground truth.

use crate::config::{ExperimentConfig, Setting};
use anyhow::{Context, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::{Duration, Instant};
use usf_core::chanest::{self, EstimatorOptions};
use usf_core::frontend::{self, ModuloAdcConfig, QuantNoiseReport};
use usf_core::sic::{self, MetricSet, NlmsConfig};
use usf_core::unfolding::{self, UnfoldingConfig};
use usf_core::waveforms::{self, BasebandSignal, MixtureConfig, PilotSpec, ReceivedMixture, SparseChannel};
use usf_core::Complex64;

/// Seeds of the independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub uplink_bits: u64,
    pub downlink_bits: u64,
    pub data_noise: u64,
    pub pilot_noise: u64,
}

/// Stream `trial` of a ChaCha generator keyed by the master seed.
pub fn trial_seeds(master: u64, trial: u64) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    TrialSeeds {
        uplink_bits: rng.next_u64(),
        downlink_bits: rng.next_u64(),
        data_noise: rng.next_u64(),
        pilot_noise: rng.next_u64(),
    }
}

/// Stream reserved for the calibration run.
const CALIBRATION_STREAM: u64 = u64::MAX;

/// Quantities fixed across trials: gains from the calibration run and the
/// resolved unfolding settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sps: usize,
    pub sample_interval: f64,
    pub bandwidth: f64,
    /// Amplitude applied to the unit-power uplink waveform.
    pub soi_gain: f64,
    /// Amplitude applied to the unit-power downlink waveform (SI path).
    pub si_gain: f64,
    /// Complex noise variance per sample.
    pub noise_variance: f64,
    /// Rail peak of the scaled calibration mixture.
    pub peak: f64,
    pub unfolding: UnfoldingConfig,
    pub pilot: PilotSpec,
    pub quant: Option<QuantNoiseReport>,
}

impl Calibration {
    /// True SI channel as seen against the unit-power reference. A silent
    /// SI path keeps a vanishing amplitude so the channel stays valid.
    pub fn si_channel(&self, cfg: &ExperimentConfig) -> Result<SparseChannel> {
        Ok(SparseChannel::self_interference(
            (self.si_gain * cfg.si_amplitude).max(f64::MIN_POSITIVE),
            cfg.si_delay * self.sample_interval,
        )?)
    }
}

/// Unit-power baseband waveforms of one trial, before any gain.
struct Waveforms {
    uplink_bits: Vec<u8>,
    uplink: BasebandSignal,
    downlink: BasebandSignal,
    /// Shaped length before zero padding; detection stops here.
    shaped_len: usize,
}

fn waveforms(cfg: &ExperimentConfig, seeds: &TrialSeeds) -> Result<Waveforms> {
    let sps = cfg.sps();
    let pulse = cfg.pulse();
    let shape = |seed: u64| -> Result<(Vec<u8>, BasebandSignal)> {
        let bits = waveforms::random_bits(2 * cfg.symbols, &mut ChaCha8Rng::seed_from_u64(seed));
        let x = waveforms::pulse_shape(&waveforms::qpsk_modulate(&bits)?, sps, &pulse)?;
        Ok((bits, x))
    };
    let (uplink_bits, up) = shape(seeds.uplink_bits)?;
    let (_, down) = shape(seeds.downlink_bits)?;
    // Zero padding so that the circular SI delay never wraps signal around.
    let pad = cfg.si_delay.ceil() as usize + sps;
    let padded = |x: &BasebandSignal| {
        let mut s = x.samples().to_vec();
        s.resize(s.len() + pad, Complex64::new(0.0, 0.0));
        x.with_samples(s)
    };
    Ok(Waveforms {
        uplink_bits,
        shaped_len: up.len(),
        uplink: padded(&up)?,
        downlink: padded(&down)?,
    })
}

/// Unit-power SI as it arrives: the downlink through the true delay.
fn si_unit(cfg: &ExperimentConfig, downlink: &BasebandSignal) -> Result<BasebandSignal> {
    let ch = SparseChannel::self_interference(cfg.si_amplitude, cfg.si_delay * downlink.sample_interval())?;
    Ok(waveforms::apply_sparse_channel(downlink, &ch, 1.0)?)
}

/// Resolves gains, `β_r`, `L` and the pilot from a calibration trial.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<Calibration> {
    cfg.validate()?;
    let sps = cfg.sps();
    let t = cfg.sample_interval();
    let bandwidth = cfg.pulse().bandwidth();
    let w = waveforms(cfg, &trial_seeds(cfg.seed, CALIBRATION_STREAM))?;
    let si = si_unit(cfg, &w.downlink)?;

    let mut soi_gain = cfg.p_u.sqrt() * cfg.uplink_gain;
    let soi_power = w.uplink.scaled(soi_gain).power();
    let mut si_gain = match cfg.sir_db {
        Some(sir) => (soi_power * 10f64.powf(-sir / 10.0) / si.power()).sqrt(),
        None => cfg.p_d.sqrt(),
    };
    let mixture = w.uplink.scaled(soi_gain).add(&si.scaled(si_gain))?;
    let raw_peak = mixture.rail_peak();
    let scale = match cfg.received_peak {
        Some(target) if raw_peak > 0.0 => target / raw_peak,
        _ => 1.0,
    };
    soi_gain *= scale;
    si_gain *= scale;
    let peak = raw_peak * scale;
    // SoI-referenced SNR against the nominal unit-power waveform.
    let noise_variance = match cfg.snr_db {
        Some(snr) => soi_gain * soi_gain * 10f64.powf(-snr / 10.0),
        None => 0.0,
    };

    let beta_r = match cfg.beta_r {
        Setting::Fixed(b) => b,
        Setting::Auto => UnfoldingConfig::lattice_bound(peak, cfg.lambda),
    };
    let mut unfolding = UnfoldingConfig {
        order: 1,
        lambda: cfg.lambda,
        beta_r,
        sample_interval: t,
        bandwidth,
        oversampling_alpha: None,
    };
    unfolding.order = match cfg.unfolding_order {
        Setting::Fixed(l) => l,
        Setting::Auto => unfolding::choose_order(&unfolding, (cfg.lambda / peak).min(1.0))?,
    };

    let adc = ModuloAdcConfig::new(cfg.lambda, cfg.bits)?;
    let quant = match cfg.bits {
        Some(_) if peak >= cfg.lambda => Some(frontend::quant_noise_analysis(
            &adc,
            peak,
            Some(frontend::GainBoundParams {
                order: unfolding.order,
                sample_interval: t,
                bandwidth,
            }),
        )?),
        _ => None,
    };
    let pilot = PilotSpec::random(
        cfg.pilot_samples as f64 * t,
        cfg.pilot_harmonics,
        cfg.pilot_samples,
        cfg.pilot_seed,
    )?;
    Ok(Calibration {
        sps,
        sample_interval: t,
        bandwidth,
        soi_gain,
        si_gain,
        noise_variance,
        peak,
        unfolding,
        pilot,
        quant,
    })
}

/// Channel-estimation outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelReport {
    pub amplitude: f64,
    pub delay: f64,
    pub amplitude_hat: f64,
    pub delay_hat: f64,
    /// NMSE of the estimated frequency response over the pilot harmonics.
    pub nmse: f64,
    pub folds_true: usize,
    pub folds_hat: usize,
}

/// Measured quantization-noise powers (per rail) of both converters on
/// this trial's received signal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasuredNoise {
    pub conventional: f64,
    pub modulo: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialReport {
    pub trial: usize,
    /// Module errors hit during the trial; the remaining stages still ran.
    pub errors: Vec<String>,
    pub channel: Option<ChannelReport>,
    /// Unfolded received signal against the true received signal.
    pub received: Option<MetricSet>,
    /// Clipping ADC spanning `[-λ, λ]`, against the true received signal.
    pub clipped: Option<MetricSet>,
    pub si_proposed: Option<MetricSet>,
    pub si_nlms: Option<MetricSet>,
    /// SoI after cancellation, with the detection BER.
    pub soi: Option<MetricSet>,
    pub quant_measured: Option<MeasuredNoise>,
    pub elapsed: Duration,
}

/// Every waveform of one trial, for dumps.
#[derive(Debug, Clone)]
pub struct TrialWaveforms {
    pub truth: BasebandSignal,
    pub folded: BasebandSignal,
    pub quantized: BasebandSignal,
    pub recovered: Option<BasebandSignal>,
    pub si_hat_proposed: BasebandSignal,
    pub si_hat_nlms: Option<BasebandSignal>,
    pub soi_hat: Option<BasebandSignal>,
}

/// Keeps a stage's value, or records its error and carries on.
fn note<T>(errors: &mut Vec<String>, stage: &str, r: usf_core::Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{stage}: {e}"));
            None
        }
    }
}

fn nmse_of_response(truth: &SparseChannel, est: Option<&SparseChannel>, pilot: &PilotSpec) -> f64 {
    let w0 = pilot.fundamental();
    let half = pilot.half_bandwidth() as i64;
    let (mut err, mut norm) = (0.0, 0.0);
    for p in (-half..=half).filter(|&p| p != 0) {
        let h = truth.response(p, w0);
        let h_hat = est.map_or(Complex64::new(0.0, 0.0), |e| e.response(p, w0));
        err += (h_hat - h).norm_sqr();
        norm += h.norm_sqr();
    }
    err / norm
}

fn jump_count(x: &BasebandSignal, lambda: f64) -> usize {
    let eps: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|v| {
            let fold = |r: f64| frontend::fold_with_index(r, lambda).0 - r;
            Complex64::new(fold(v.re), fold(v.im))
        })
        .collect();
    let k = eps.len();
    (0..k).filter(|&i| (eps[(i + 1) % k] - eps[i]).norm() > lambda).count()
}

/// Pilot phase: the SI pilot alone, folded and quantized, then estimated.
fn pilot_phase(
    cfg: &ExperimentConfig,
    cal: &Calibration,
    seeds: &TrialSeeds,
    errors: &mut Vec<String>,
) -> Result<(ChannelReport, Option<SparseChannel>)> {
    let truth = cal.si_channel(cfg)?;
    let pilot = waveforms::generate_pilot(&cal.pilot)?;
    let si = waveforms::apply_sparse_channel(&pilot, &truth, 1.0)?;
    let variance = if cfg.pilot_noiseless { 0.0 } else { cal.noise_variance };
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.pilot_noise);
    let noise = si.with_samples(waveforms::complex_gaussian(si.len(), variance, &mut rng))?;
    let rx = si.add(&noise)?;
    let adc = ModuloAdcConfig::new(cfg.lambda, cfg.bits)?;
    let folded = frontend::modulo_adc(&rx, &adc);

    let quant_var = adc.quantizer().map_or(0.0, |q| 2.0 * q.step() * q.step() / 12.0);
    let opts = EstimatorOptions {
        noise_variance: Some(variance + quant_var),
        ..Default::default()
    };
    let est = note(
        errors,
        "channel estimation",
        chanest::estimate_si_channel(&folded, &cal.pilot, cfg.lambda, &opts),
    );
    let channel = est.as_ref().map(|e| e.channel);
    let report = ChannelReport {
        amplitude: truth.amplitude,
        delay: truth.delay,
        amplitude_hat: channel.map_or(f64::NAN, |c| c.amplitude),
        delay_hat: channel.map_or(f64::NAN, |c| c.delay),
        nmse: nmse_of_response(&truth, channel.as_ref(), &cal.pilot),
        folds_true: jump_count(&rx, cfg.lambda),
        folds_hat: est.as_ref().map_or(0, |e| e.folds.count()),
    };
    Ok((report, channel))
}

/// Runs one trial; `Err` only for setup problems, module failures are
/// recorded in the report.
pub fn run_trial(cfg: &ExperimentConfig, cal: &Calibration, trial: usize) -> Result<(TrialReport, TrialWaveforms)> {
    let start = Instant::now();
    let seeds = trial_seeds(cfg.seed, trial as u64);
    let mut errors = Vec::new();

    let (channel_report, h_hat) = pilot_phase(cfg, cal, &seeds, &mut errors)?;

    let w = waveforms(cfg, &seeds)?;
    let si_ref = si_unit(cfg, &w.downlink)?;
    let mix: ReceivedMixture = waveforms::compose_received_parts(
        &w.uplink,
        &si_ref,
        &MixtureConfig {
            p_u: cal.soi_gain * cal.soi_gain,
            p_d: cal.si_gain * cal.si_gain,
            sir_db: None,
            snr_db: cfg.snr_db,
            reference_power: Some(cal.soi_gain * cal.soi_gain),
            rng_seed: seeds.data_noise,
        },
    )?;
    let truth = mix.total.clone();

    let adc = ModuloAdcConfig::new(cfg.lambda, cfg.bits)?;
    let folded = frontend::modulo_adc(&truth, &ModuloAdcConfig::new(cfg.lambda, None)?);
    let quantized = frontend::modulo_adc(&truth, &adc);

    let recovered = note(
        &mut errors,
        "unfolding",
        unfolding::usf_recover(&quantized, &cal.unfolding),
    );
    let received = recovered.as_ref().and_then(|r| {
        note(
            &mut errors,
            "metrics",
            sic::compute_metrics(r.samples(), truth.samples(), None),
        )
    });

    let clipped = if cfg.clipped_baseline {
        let span = 2.0 * cfg.lambda;
        let clipped = match cfg.bits {
            Some(b) => frontend::conventional_adc(&truth, span, b)?,
            None => truth.map_rails(|v| v.clamp(-cfg.lambda, cfg.lambda)),
        };
        note(
            &mut errors,
            "metrics",
            sic::compute_metrics(clipped.samples(), truth.samples(), None),
        )
    } else {
        None
    };

    let quant_measured = cfg.bits.map(|b| -> Result<MeasuredNoise> {
        let full = frontend::conventional_adc(&truth, 2.0 * cal.unfolding.beta_r.max(cal.peak), b)?;
        let rail_noise = |a: &BasebandSignal, b: &BasebandSignal| {
            a.samples()
                .iter()
                .zip(b.samples())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                / (2 * a.len()) as f64
        };
        Ok(MeasuredNoise {
            conventional: rail_noise(&full, &truth),
            modulo: rail_noise(&quantized, &folded),
        })
    });
    let quant_measured = quant_measured.transpose()?;

    // SI replica from the pilot-phase estimate; no estimate means no
    // cancellation.
    let si_hat = match &h_hat {
        Some(h) => sic::reconstruct_si(h, &w.downlink)?,
        None => w.downlink.scaled(0.0),
    };
    let si_truth = &mix.si;
    let score_si = |est: &BasebandSignal, errors: &mut Vec<String>| -> Option<MetricSet> {
        let mut m = note(
            errors,
            "metrics",
            sic::compute_metrics(est.samples(), si_truth.samples(), None),
        )?;
        m.sic_db = Some(10.0 * (1.0 / m.nmse).log10());
        Some(m)
    };
    let si_proposed = score_si(&si_hat, &mut errors);

    let si_hat_nlms = if cfg.nlms {
        // The baseline sees an unsaturated converter spanning the full range.
        let full = match cfg.bits {
            Some(b) => frontend::conventional_adc(&truth, 2.0 * cal.unfolding.beta_r.max(cal.peak), b)?,
            None => truth.clone(),
        };
        let nlms = NlmsConfig {
            order: cfg.nlms_order,
            step: cfg.nlms_step,
            regularizer: cfg.nlms_regularizer,
        };
        note(&mut errors, "nlms", sic::nlms_estimate(&w.downlink, &full, &nlms))
    } else {
        None
    };
    let si_nlms = si_hat_nlms.as_ref().and_then(|s| score_si(s, &mut errors));

    let mut soi_hat = None;
    let mut soi = None;
    if let Some(r) = &recovered {
        let res = sic::cancel_si(r, &si_hat, Some(si_truth))?;
        let head = res.soi.with_samples(res.soi.samples()[..w.shaped_len].to_vec())?;
        let uplink = SparseChannel::uplink(cal.soi_gain)?;
        let bits = note(
            &mut errors,
            "detection",
            sic::qpsk_detect(&head, &uplink, cal.sps, &cfg.pulse()),
        );
        soi = bits.and_then(|bits| {
            note(
                &mut errors,
                "metrics",
                sic::compute_metrics(
                    res.soi.samples(),
                    mix.soi.samples(),
                    Some((bits.as_slice(), w.uplink_bits.as_slice())),
                ),
            )
        });
        if let Some(m) = soi.as_mut() {
            m.sic_db = res.sic_db;
        }
        soi_hat = Some(res.soi);
    }

    let report = TrialReport {
        trial,
        errors,
        channel: Some(channel_report),
        received,
        clipped,
        si_proposed,
        si_nlms,
        soi,
        quant_measured,
        elapsed: start.elapsed(),
    };
    let waves = TrialWaveforms {
        truth,
        folded,
        quantized,
        recovered,
        si_hat_proposed: si_hat,
        si_hat_nlms,
        soi_hat,
    };
    Ok((report, waves))
}

/// All trials of `cfg`, in trial order, run in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Calibration, Vec<TrialReport>)> {
    let cal = calibrate(cfg).context("calibration")?;
    let reports = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, &cal, t)
                .map(|(r, _)| r)
                .with_context(|| format!("trial {t}"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cal, reports))
}
