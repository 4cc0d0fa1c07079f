use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use usf_harness::{experiment, noise, report, ExperimentConfig};

#[derive(Parser)]
#[command(version, about = "Modulo-ADC full-duplex receiver simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of a config and write per-trial metrics as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Metrics CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the waveforms of trial 0.
        #[arg(long)]
        dump_waveforms: Option<PathBuf>,
    },
    /// Vary one config field and write one aggregated row per value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `0,10,20`.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo quantization noise of the conventional and modulo ADCs.
    NoiseAnalysis {
        #[arg(long)]
        zeta: f64,
        /// `1..12`, `1..=12` or `2,4,8`.
        #[arg(long)]
        bits: String,
        /// Comma-separated input peaks (dynamic ranges).
        #[arg(long, default_value = "1")]
        dr: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            dump_waveforms,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (cal, reports) = usf_harness::run_experiment(&cfg)?;
            match out {
                Some(path) => report::write_trials(create(&path)?, &reports)?,
                None => report::write_trials(std::io::stdout().lock(), &reports)?,
            }
            if let Some(path) = dump_waveforms {
                let (_, waves) = experiment::run_trial(&cfg, &cal, 0)?;
                report::write_waveforms(create(&path)?, &waves)?;
            }
            let elapsed: f64 = reports.iter().map(|r| r.elapsed.as_secs_f64()).sum();
            eprintln!(
                "{} trials, L = {}, beta_r = {}, {:.2} s of trial time",
                reports.len(),
                cal.unfolding.order,
                cal.unfolding.beta_r,
                elapsed
            );
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let values = usf_harness::parse_values(&values)?;
            let points = usf_harness::sweep(&cfg, &axis, &values)?;
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record(report::sweep_header())?;
            for (v, reports) in &points {
                w.write_record(report::sweep_row(&axis, *v, reports))?;
            }
            w.flush()?;
        }
        Command::NoiseAnalysis {
            zeta,
            bits,
            dr,
            samples,
            seed,
            out,
        } => {
            let bits = noise::parse_bits(&bits)?;
            let peaks = usf_harness::parse_values(&dr)?;
            let rows = noise::noise_analysis(zeta, &bits, &peaks, samples, seed)?;
            noise::write_noise(create(&out)?, &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
