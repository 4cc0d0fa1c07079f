//! Seeded Monte Carlo experiments for the modulo-ADC full-duplex receiver:
//! configuration, trial execution, parameter sweeps and CSV reports.

pub mod config;
pub mod experiment;
pub mod noise;
pub mod report;

pub use config::{ExperimentConfig, Setting};
pub use experiment::{calibrate, run_experiment, run_trial, Calibration, TrialReport};

use anyhow::Result;

/// One aggregated sweep point per value, in the order given.
pub fn sweep(cfg: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<Vec<(f64, Vec<TrialReport>)>> {
    values
        .iter()
        .map(|&v| {
            let point = cfg.with_axis(axis, v)?;
            let (_, reports) = run_experiment(&point)?;
            Ok((v, reports))
        })
        .collect()
}

/// Parses a comma-separated list of numbers.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| anyhow::anyhow!("bad value {s:?}: {e}"))
        })
        .collect()
}
