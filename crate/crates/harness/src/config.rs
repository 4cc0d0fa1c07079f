//! Experiment configuration: a flat TOML document.

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{E, PI};
use std::path::Path;
use usf_core::waveforms::{Pulse, PulseShape};

pub const SCHEMA_VERSION: u32 = 1;

/// A parameter that is either derived (`"auto"`) or pinned.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Setting<T> {
    #[default]
    Auto,
    Fixed(T),
}

impl<T: Serialize> Serialize for Setting<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => s.serialize_str("auto"),
            Setting::Fixed(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Setting<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Keyword(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(v) => Ok(Setting::Fixed(v)),
            Raw::Keyword(k) if k == "auto" => Ok(Setting::Auto),
            Raw::Keyword(k) => Err(serde::de::Error::custom(format!(
                "expected a number or \"auto\", got {k:?}"
            ))),
        }
    }
}

/// Optional fields are written as `"none"` so that a document can switch
/// off a setting whose default is on.
mod none_keyword {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, T: Serialize>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => v.serialize(s),
            None => s.serialize_str("none"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> Result<Option<T>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Keyword(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(v) => Ok(Some(v)),
            Raw::Keyword(k) if k == "none" => Ok(None),
            Raw::Keyword(k) => Err(serde::de::Error::custom(format!(
                "expected a number or \"none\", got {k:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Rrc,
    Rect,
}

/// Every knob of one experiment. Field docs double as the schema reference
/// in the README.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Master seed; per-trial seeds are derived from it.
    pub seed: u64,
    pub trials: usize,

    /// QPSK symbols per direction and trial.
    pub symbols: usize,
    /// Sampling rate over the Nyquist rate of the shaped signal.
    pub oversampling: f64,
    /// Overrides `oversampling` when set.
    #[serde(with = "none_keyword")]
    pub samples_per_symbol: Option<usize>,
    pub pulse: PulseKind,
    pub rolloff: f64,
    /// RRC length in symbols.
    pub span: usize,

    /// Pilot samples per period, `K`.
    pub pilot_samples: usize,
    /// Highest pilot harmonic, `P`.
    pub pilot_harmonics: usize,
    pub pilot_seed: u64,
    /// Skip thermal noise during the pilot phase (quantization stays).
    pub pilot_noiseless: bool,

    /// SI delay in samples; may be fractional.
    pub si_delay: f64,
    pub si_amplitude: f64,
    pub uplink_gain: f64,

    pub p_u: f64,
    pub p_d: f64,
    /// `10 log10(P_SoI / P_SI)`; overrides `p_d` when set.
    #[serde(with = "none_keyword")]
    pub sir_db: Option<f64>,
    /// SoI-referenced SNR; omit for a noiseless channel.
    #[serde(with = "none_keyword")]
    pub snr_db: Option<f64>,
    /// Scales the whole mixture so a calibration trial peaks here.
    #[serde(with = "none_keyword")]
    pub received_peak: Option<f64>,

    pub lambda: f64,
    /// ADC resolution; omit for an unquantized converter.
    #[serde(with = "none_keyword")]
    pub bits: Option<u32>,

    pub unfolding_order: Setting<usize>,
    pub beta_r: Setting<f64>,

    pub nlms: bool,
    pub nlms_order: usize,
    pub nlms_step: f64,
    pub nlms_regularizer: f64,
    pub clipped_baseline: bool,
}

impl Default for ExperimentConfig {
    /// The low-resolution operating point: 4 bits, λ = 1, a received peak of
    /// 10, SI 20 dB above the SoI and 40 dB SNR.
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            trials: 100,
            symbols: 256,
            oversampling: (2.0 * PI * E).ceil(),
            samples_per_symbol: None,
            pulse: PulseKind::Rrc,
            rolloff: 0.25,
            span: 8,
            pilot_samples: 256,
            pilot_harmonics: 2,
            pilot_seed: 7,
            pilot_noiseless: false,
            si_delay: 5.0,
            si_amplitude: 1.0,
            uplink_gain: 1.0,
            p_u: 1.0,
            p_d: 1.0,
            sir_db: Some(-20.0),
            snr_db: Some(40.0),
            received_peak: Some(10.0),
            lambda: 1.0,
            bits: Some(4),
            unfolding_order: Setting::Auto,
            beta_r: Setting::Auto,
            nlms: true,
            nlms_order: 32,
            nlms_step: 0.5,
            nlms_regularizer: 1e-6,
            clipped_baseline: true,
        }
    }
}

/// Scalar fields a sweep may vary, and whether they take integers.
pub const SWEEP_AXES: &[(&str, bool)] = &[
    ("seed", true),
    ("trials", true),
    ("symbols", true),
    ("oversampling", false),
    ("samples_per_symbol", true),
    ("rolloff", false),
    ("span", true),
    ("pilot_samples", true),
    ("pilot_harmonics", true),
    ("pilot_seed", true),
    ("si_delay", false),
    ("si_amplitude", false),
    ("uplink_gain", false),
    ("p_u", false),
    ("p_d", false),
    ("sir_db", false),
    ("snr_db", false),
    ("received_peak", false),
    ("lambda", false),
    ("bits", true),
    ("unfolding_order", true),
    ("beta_r", false),
    ("nlms_order", true),
    ("nlms_step", false),
    ("nlms_regularizer", false),
];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().context("config is not valid TOML")?;
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("loading {}", path.display()))
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        match table.get("schema_version") {
            Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => bail!("unsupported schema_version {v}; this build reads {SCHEMA_VERSION}"),
            None => bail!("missing schema_version"),
        }
        // Keys left out keep their defaults.
        let mut merged = toml::Table::try_from(Self::default())?;
        merged.extend(table);
        let cfg: Self = merged.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Copy of `self` with one sweepable field replaced.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let &(_, integer) = SWEEP_AXES.iter().find(|(name, _)| *name == axis).ok_or_else(|| {
            let names: Vec<&str> = SWEEP_AXES.iter().map(|(n, _)| *n).collect();
            anyhow!("unknown sweep axis {axis:?}; expected one of {}", names.join(", "))
        })?;
        let v = if integer {
            ensure!(
                value.fract() == 0.0 && value >= 0.0,
                "axis {axis} takes non-negative integers, got {value}"
            );
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        let mut table = toml::Table::try_from(self)?;
        table.insert(axis.to_string(), v);
        Self::from_table(table).with_context(|| format!("{axis} = {value}"))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "trials must be >= 1");
        ensure!(self.symbols >= 1, "symbols must be >= 1");
        ensure!(self.oversampling >= 1.0, "oversampling must be >= 1");
        ensure!(self.samples_per_symbol != Some(0), "samples_per_symbol must be >= 1");
        self.pulse().validate()?;
        ensure!(self.pilot_harmonics >= 1, "pilot_harmonics must be >= 1");
        ensure!(
            self.pilot_samples >= 2 * self.pilot_harmonics + 2,
            "pilot_samples must be >= 2 pilot_harmonics + 2"
        );
        ensure!(
            self.si_delay >= 0.0 && self.si_delay < self.pilot_samples as f64,
            "si_delay must lie in [0, pilot_samples)"
        );
        ensure!(self.si_amplitude > 0.0, "si_amplitude must be > 0");
        ensure!(self.uplink_gain > 0.0, "uplink_gain must be > 0");
        ensure!(self.p_u > 0.0 && self.p_d >= 0.0, "p_u must be > 0 and p_d >= 0");
        if let Some(peak) = self.received_peak {
            ensure!(peak > 0.0, "received_peak must be > 0");
        }
        ensure!(self.lambda > 0.0 && self.lambda.is_finite(), "lambda must be > 0");
        if let Some(b) = self.bits {
            ensure!((1..=52).contains(&b), "bits must be in 1..=52");
        }
        if let Setting::Fixed(l) = self.unfolding_order {
            ensure!(l >= 1, "unfolding_order must be >= 1");
        }
        if let Setting::Fixed(b) = self.beta_r {
            ensure!(b > 0.0, "beta_r must be > 0");
        }
        ensure!(self.nlms_order >= 1, "nlms_order must be >= 1");
        ensure!((0.0..=2.0).contains(&self.nlms_step), "nlms_step must be in [0, 2]");
        ensure!(self.nlms_regularizer >= 0.0, "nlms_regularizer must be >= 0");
        Ok(())
    }

    pub fn pulse(&self) -> Pulse {
        let shape = match self.pulse {
            PulseKind::Rrc => PulseShape::RootRaisedCosine {
                rolloff: self.rolloff,
                span: self.span,
            },
            PulseKind::Rect => PulseShape::Rectangular,
        };
        Pulse {
            shape,
            symbol_period: 1.0,
        }
    }

    /// Samples per symbol: explicit, or the oversampling factor times the
    /// Nyquist rate `Ω / π` of the pulse, rounded up.
    pub fn sps(&self) -> usize {
        self.samples_per_symbol.unwrap_or_else(|| {
            let pulse = self.pulse();
            let nyquist = pulse.bandwidth() / PI * pulse.symbol_period;
            ((self.oversampling * nyquist) - 1e-9).ceil().max(1.0) as usize
        })
    }

    pub fn sample_interval(&self) -> f64 {
        self.pulse().symbol_period / self.sps() as f64
    }
}
