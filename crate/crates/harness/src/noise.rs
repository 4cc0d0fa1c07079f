//! Quantization-noise comparison of the conventional and modulo ADCs over a
//! grid of bit budgets and dynamic ranges.

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use usf_core::frontend::{self, ModuloAdcConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRow {
    pub bits: u32,
    /// Input peak `||r||_inf`; the conventional ADC spans `±peak` and the
    /// modulo ADC folds at `λ = ζ peak`.
    pub dynamic_range: f64,
    pub zeta: f64,
    pub samples: usize,
    pub conventional: f64,
    pub modulo: f64,
    pub analytic_conventional: f64,
    pub analytic_modulo: f64,
    pub effective_bits: f64,
}

impl NoiseRow {
    pub fn gap_db(&self) -> f64 {
        10.0 * (self.conventional / self.modulo).log10()
    }
}

pub const NOISE_COLUMNS: &[&str] = &[
    "bits",
    "dynamic_range",
    "zeta",
    "samples",
    "conventional",
    "modulo",
    "conventional_db",
    "modulo_db",
    "gap_db",
    "analytic_conventional",
    "analytic_modulo",
    "analytic_gap_db",
    "effective_bits",
];

/// Parses `3`, `1..12` / `1..=12` (inclusive) or `1,2,5`.
pub fn parse_bits(spec: &str) -> Result<Vec<u32>> {
    let spec = spec.trim();
    let range = spec.split_once("..=").or_else(|| spec.split_once(".."));
    let bits: Vec<u32> = match range {
        Some((a, b)) => {
            let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
            ensure!(a <= b, "empty bit range {spec}");
            (a..=b).collect()
        }
        None => spec
            .split(',')
            .map(|s| s.trim().parse::<u32>().with_context(|| format!("bad bit count {s:?}")))
            .collect::<Result<_>>()?,
    };
    if bits.iter().any(|&b| b == 0 || b > 52) {
        bail!("bit counts must lie in 1..=52");
    }
    Ok(bits)
}

/// Monte Carlo noise of both converters for uniform inputs over
/// `[-peak, peak)`, one row per `(bits, peak)` pair.
pub fn noise_analysis(zeta: f64, bits: &[u32], peaks: &[f64], samples: usize, seed: u64) -> Result<Vec<NoiseRow>> {
    ensure!(zeta > 0.0 && zeta <= 1.0, "zeta must lie in (0, 1]");
    ensure!(samples > 0, "need at least one sample");
    let grid: Vec<(usize, u32, f64)> = bits
        .iter()
        .flat_map(|&b| peaks.iter().map(move |&p| (b, p)))
        .enumerate()
        .map(|(i, (b, p))| (i, b, p))
        .collect();
    grid.into_par_iter()
        .map(|(i, b, peak)| {
            ensure!(peak > 0.0, "dynamic range must be > 0");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let m = frontend::measure_quant_noise(peak, zeta, b, samples, &mut rng)?;
            let report = frontend::quant_noise_analysis(&ModuloAdcConfig::new(zeta * peak, Some(b))?, peak, None)?;
            Ok(NoiseRow {
                bits: b,
                dynamic_range: peak,
                zeta,
                samples,
                conventional: m.conventional,
                modulo: m.modulo,
                analytic_conventional: report.sigma_q_sq,
                analytic_modulo: report.sigma_qlambda_sq,
                effective_bits: report.effective_bits,
            })
        })
        .collect()
}

fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn write_noise<W: Write>(out: W, rows: &[NoiseRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NOISE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.bits.to_string(),
            r.dynamic_range.to_string(),
            r.zeta.to_string(),
            r.samples.to_string(),
            r.conventional.to_string(),
            r.modulo.to_string(),
            db(r.conventional).to_string(),
            db(r.modulo).to_string(),
            r.gap_db().to_string(),
            r.analytic_conventional.to_string(),
            r.analytic_modulo.to_string(),
            db(r.analytic_conventional / r.analytic_modulo).to_string(),
            r.effective_bits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
