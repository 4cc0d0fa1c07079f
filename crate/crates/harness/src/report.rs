//! CSV emission. Column names and order are part of the interface.

use crate::experiment::{TrialReport, TrialWaveforms};
use anyhow::Result;
use std::io::Write;

/// Per-trial metric columns, in CSV order.
pub const METRIC_COLUMNS: &[&str] = &[
    "h_amp",
    "h_amp_hat",
    "h_delay",
    "h_delay_hat",
    "h_nmse",
    "folds_true",
    "folds_hat",
    "recv_mse",
    "recv_nmse",
    "clipped_mse",
    "clipped_nmse",
    "si_mse_proposed",
    "si_nmse_proposed",
    "sic_db_proposed",
    "si_mse_nlms",
    "si_nmse_nlms",
    "sic_db_nlms",
    "soi_mse",
    "soi_nmse",
    "ber",
    "qnoise_conventional",
    "qnoise_modulo",
];

impl TrialReport {
    /// Values matching [`METRIC_COLUMNS`]; NaN marks a stage that did not
    /// produce a result.
    pub fn metric_values(&self) -> Vec<f64> {
        let nan = f64::NAN;
        let ch = self.channel.unwrap_or_default();
        let pick = |m: &Option<usf_core::sic::MetricSet>| {
            m.map_or((nan, nan, nan), |m| (m.mse, m.nmse, m.sic_db.unwrap_or(nan)))
        };
        let (recv_mse, recv_nmse, _) = pick(&self.received);
        let (clip_mse, clip_nmse, _) = pick(&self.clipped);
        let (sp_mse, sp_nmse, sp_db) = pick(&self.si_proposed);
        let (sn_mse, sn_nmse, sn_db) = pick(&self.si_nlms);
        let (soi_mse, soi_nmse, _) = pick(&self.soi);
        let ber = self.soi.and_then(|m| m.ber).unwrap_or(nan);
        let (qc, qm) = self.quant_measured.map_or((nan, nan), |q| (q.conventional, q.modulo));
        let (ch_vals, folds) = match self.channel {
            Some(_) => (
                [ch.amplitude, ch.amplitude_hat, ch.delay, ch.delay_hat, ch.nmse],
                [ch.folds_true as f64, ch.folds_hat as f64],
            ),
            None => ([nan; 5], [nan; 2]),
        };
        let mut v = Vec::with_capacity(METRIC_COLUMNS.len());
        v.extend(ch_vals);
        v.extend(folds);
        v.extend([
            recv_mse, recv_nmse, clip_mse, clip_nmse, sp_mse, sp_nmse, sp_db, sn_mse, sn_nmse, sn_db, soi_mse,
            soi_nmse, ber, qc, qm,
        ]);
        v
    }
}

/// Mean and sample standard deviation over the finite entries.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Per-column mean and standard deviation across trials.
pub fn aggregate(reports: &[TrialReport]) -> Vec<(f64, f64)> {
    let rows: Vec<Vec<f64>> = reports.iter().map(|r| r.metric_values()).collect();
    (0..METRIC_COLUMNS.len())
        .map(|c| mean_std(rows.iter().map(|r| r[c])))
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// `trial,errors,<metrics...>`, one row per trial then `mean` and `std` rows.
pub fn write_trials<W: Write>(out: W, reports: &[TrialReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial", "errors"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.trial.to_string(), r.errors.join("; ")];
        row.extend(r.metric_values().into_iter().map(fmt));
        w.write_record(&row)?;
    }
    let agg = aggregate(reports);
    let failed = reports.iter().filter(|r| !r.errors.is_empty()).count();
    for (label, pick) in [("mean", 0), ("std", 1)] {
        let mut row = vec![label.to_string(), format!("{failed} trials with errors")];
        row.extend(agg.iter().map(|ms| fmt(if pick == 0 { ms.0 } else { ms.1 })));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Header of the sweep table: `axis,value,trials,failed_trials`, then
/// `<metric>_mean,<metric>_std` per metric.
pub fn sweep_header() -> Vec<String> {
    let mut h: Vec<String> = ["axis", "value", "trials", "failed_trials"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in METRIC_COLUMNS {
        h.push(format!("{c}_mean"));
        h.push(format!("{c}_std"));
    }
    h
}

pub fn sweep_row(axis: &str, value: f64, reports: &[TrialReport]) -> Vec<String> {
    let failed = reports.iter().filter(|r| !r.errors.is_empty()).count();
    let mut row = vec![
        axis.to_string(),
        fmt(value),
        reports.len().to_string(),
        failed.to_string(),
    ];
    for (m, s) in aggregate(reports) {
        row.push(fmt(m));
        row.push(fmt(s));
    }
    row
}

pub const WAVEFORM_COLUMNS: &[&str] = &[
    "k",
    "truth",
    "folded",
    "quantized",
    "recovered",
    "si_hat_proposed",
    "si_hat_nlms",
    "soi_hat",
];

/// In-phase rail of every waveform of one trial; missing stages are NaN.
pub fn write_waveforms<W: Write>(out: W, waves: &TrialWaveforms) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WAVEFORM_COLUMNS)?;
    let at =
        |s: &Option<usf_core::waveforms::BasebandSignal>, k: usize| s.as_ref().map_or(f64::NAN, |s| s.samples()[k].re);
    for k in 0..waves.truth.len() {
        w.write_record([
            k.to_string(),
            fmt(waves.truth.samples()[k].re),
            fmt(waves.folded.samples()[k].re),
            fmt(waves.quantized.samples()[k].re),
            fmt(at(&waves.recovered, k)),
            fmt(waves.si_hat_proposed.samples()[k].re),
            fmt(at(&waves.si_hat_nlms, k)),
            fmt(at(&waves.soi_hat, k)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
