//! Experiment configuration: the declarative sweep description, its flat
//! key-value file format, and precoder naming.

use crate::channel::SystemGeometry;
use crate::metrics::ThpScheme;
use crate::modem::{Constellation, ConstellationKind};
use crate::precoder::{PrecodingMode, ThpStructure};
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum ConfigError {
    UnknownKey(String),
    Parse { key: String, message: String },
    Invalid(String),
    Io(std::io::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown config key: {k}"),
            ConfigError::Parse { key, message } => write!(f, "bad value for {key}: {message}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
            ConfigError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn name(&self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Some(Modulation::Qpsk),
            "16qam" | "qam16" => Some(Modulation::Qam16),
            _ => None,
        }
    }

    pub fn constellation(&self) -> Constellation {
        match self {
            Modulation::Qpsk => Constellation::new(ConstellationKind::Qpsk),
            Modulation::Qam16 => Constellation::new(ConstellationKind::Qam16),
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }
}

/// Every precoder the simulator can run. The `Mb*` variants search the
/// transmit-pattern list; the plain THP variants run the identity branch
/// only, and the linear ones invert the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderSpec {
    LinearZf,
    LinearMmse,
    ZfCthp,
    ZfDthp,
    MmseCthp,
    MmseDthp,
    MbZfCthp,
    MbZfDthp,
    MbMmseCthp,
    MbMmseDthp,
}

impl PrecoderSpec {
    pub const ALL: [PrecoderSpec; 10] = [
        PrecoderSpec::LinearZf,
        PrecoderSpec::LinearMmse,
        PrecoderSpec::ZfCthp,
        PrecoderSpec::ZfDthp,
        PrecoderSpec::MmseCthp,
        PrecoderSpec::MmseDthp,
        PrecoderSpec::MbZfCthp,
        PrecoderSpec::MbZfDthp,
        PrecoderSpec::MbMmseCthp,
        PrecoderSpec::MbMmseDthp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PrecoderSpec::LinearZf => "linear-zf",
            PrecoderSpec::LinearMmse => "linear-mmse",
            PrecoderSpec::ZfCthp => "zf-cthp",
            PrecoderSpec::ZfDthp => "zf-dthp",
            PrecoderSpec::MmseCthp => "mmse-cthp",
            PrecoderSpec::MmseDthp => "mmse-dthp",
            PrecoderSpec::MbZfCthp => "mb-zf-cthp",
            PrecoderSpec::MbZfDthp => "mb-zf-dthp",
            PrecoderSpec::MbMmseCthp => "mb-mmse-cthp",
            PrecoderSpec::MbMmseDthp => "mb-mmse-dthp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL.iter().find(|p| p.name() == lower).copied()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, PrecoderSpec::LinearZf | PrecoderSpec::LinearMmse)
    }

    pub fn is_multi_branch(&self) -> bool {
        matches!(
            self,
            PrecoderSpec::MbZfCthp
                | PrecoderSpec::MbZfDthp
                | PrecoderSpec::MbMmseCthp
                | PrecoderSpec::MbMmseDthp
        )
    }

    pub fn mode(&self) -> PrecodingMode {
        match self {
            PrecoderSpec::LinearZf
            | PrecoderSpec::ZfCthp
            | PrecoderSpec::ZfDthp
            | PrecoderSpec::MbZfCthp
            | PrecoderSpec::MbZfDthp => PrecodingMode::Zf,
            _ => PrecodingMode::Mmse,
        }
    }

    /// THP structure; `None` for the linear precoders.
    pub fn structure(&self) -> Option<ThpStructure> {
        match self {
            PrecoderSpec::LinearZf | PrecoderSpec::LinearMmse => None,
            PrecoderSpec::ZfCthp | PrecoderSpec::MmseCthp | PrecoderSpec::MbZfCthp
            | PrecoderSpec::MbMmseCthp => Some(ThpStructure::Centralized),
            PrecoderSpec::ZfDthp | PrecoderSpec::MmseDthp | PrecoderSpec::MbZfDthp
            | PrecoderSpec::MbMmseDthp => Some(ThpStructure::Decentralized),
        }
    }

    pub fn structure_name(&self) -> &'static str {
        match self.structure() {
            None => "linear",
            Some(ThpStructure::Centralized) => "centralized",
            Some(ThpStructure::Decentralized) => "decentralized",
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self.mode() {
            PrecodingMode::Zf => "zf",
            PrecodingMode::Mmse => "mmse",
        }
    }

    /// Analytic scheme used for covariance/sum-rate formulas.
    pub fn thp_scheme(&self) -> Option<ThpScheme> {
        match (self.structure()?, self.mode()) {
            (ThpStructure::Decentralized, PrecodingMode::Zf) => Some(ThpScheme::ZfDthp),
            (ThpStructure::Centralized, PrecodingMode::Zf) => Some(ThpScheme::ZfCthp),
            (ThpStructure::Decentralized, PrecodingMode::Mmse) => Some(ThpScheme::MmseDthp),
            (ThpStructure::Centralized, PrecodingMode::Mmse) => Some(ThpScheme::MmseCthp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ber,
    SumRate,
    Covariance,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ber => "ber",
            Metric::SumRate => "sumrate",
            Metric::Covariance => "covariance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ber" => Some(Metric::Ber),
            "sumrate" | "sum-rate" => Some(Metric::SumRate),
            "covariance" => Some(Metric::Covariance),
            _ => None,
        }
    }
}

/// Declarative sweep description. Desk-scale defaults: a four-user
/// (2,2,2,2)x8 downlink at 1e5 trials of 100 symbol vectors each.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub geometry: SystemGeometry,
    pub modulation: Modulation,
    pub precoder: PrecoderSpec,
    /// Branch cap for the multi-branch precoders; ignored otherwise.
    pub branches: usize,
    pub ebno_db: Vec<f64>,
    pub trials: u64,
    /// Symbol vectors per packet (one channel draw per packet).
    pub packet_len: usize,
    pub master_seed: u64,
    pub correlation_r: f64,
    pub csi_error_var: f64,
    pub metric: Metric,
    /// Diagnostic override: zero noise regardless of Eb/N0.
    pub noiseless: bool,
    /// Diagnostic override: identity channel instead of Rayleigh draws.
    pub identity_channel: bool,
    /// Worker threads; 0 = library default.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: SystemGeometry::new(8, vec![2, 2, 2, 2]).expect("valid default"),
            modulation: Modulation::Qpsk,
            precoder: PrecoderSpec::MmseCthp,
            branches: 2,
            ebno_db: (0..=20).step_by(2).map(f64::from).collect(),
            trials: 100_000,
            packet_len: 100,
            master_seed: 1,
            correlation_r: 0.0,
            csi_error_var: 0.0,
            metric: Metric::Ber,
            noiseless: false,
            identity_channel: false,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(ConfigError::Invalid("trials must be >= 1".into()));
        }
        if self.packet_len < 1 {
            return Err(ConfigError::Invalid("packet_len must be >= 1".into()));
        }
        if self.ebno_db.is_empty() {
            return Err(ConfigError::Invalid("ebno_db sweep is empty".into()));
        }
        if self.ebno_db.iter().any(|e| !e.is_finite()) {
            return Err(ConfigError::Invalid("ebno_db must be finite".into()));
        }
        if self.branches < 1 {
            return Err(ConfigError::Invalid("branches must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.correlation_r) {
            return Err(ConfigError::Invalid(
                "correlation_r must be in [0, 1)".into(),
            ));
        }
        if self.csi_error_var < 0.0 {
            return Err(ConfigError::Invalid("csi_error_var must be >= 0".into()));
        }
        Ok(())
    }

    /// Parses the flat `key = value` config format. `#` starts a comment;
    /// unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut num_tx: Option<usize> = None;
        let mut users: Option<Vec<usize>> = None;
        for raw in text.lines() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                key: line.to_string(),
                message: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_err = |message: &str| ConfigError::Parse {
                key: key.to_string(),
                message: message.to_string(),
            };
            match key {
                "num_tx" => {
                    num_tx = Some(value.parse().map_err(|_| parse_err("expected integer"))?)
                }
                "users" => {
                    let list: Result<Vec<usize>, _> =
                        value.split(',').map(|v| v.trim().parse()).collect();
                    users = Some(list.map_err(|_| parse_err("expected comma list of integers"))?);
                }
                "modulation" => {
                    cfg.modulation =
                        Modulation::parse(value).ok_or_else(|| parse_err("unknown modulation"))?
                }
                "precoder" => {
                    cfg.precoder =
                        PrecoderSpec::parse(value).ok_or_else(|| parse_err("unknown precoder"))?
                }
                "branches" => {
                    cfg.branches = value.parse().map_err(|_| parse_err("expected integer"))?
                }
                "ebno_db" => cfg.ebno_db = parse_ebno(value).ok_or_else(|| {
                    parse_err("expected start:step:stop or comma list")
                })?,
                "trials" => {
                    cfg.trials = value.parse().map_err(|_| parse_err("expected integer"))?
                }
                "packet_len" => {
                    cfg.packet_len = value.parse().map_err(|_| parse_err("expected integer"))?
                }
                "master_seed" => {
                    cfg.master_seed = value.parse().map_err(|_| parse_err("expected integer"))?
                }
                "correlation_r" => {
                    cfg.correlation_r = value.parse().map_err(|_| parse_err("expected real"))?
                }
                "csi_error_var" => {
                    cfg.csi_error_var = value.parse().map_err(|_| parse_err("expected real"))?
                }
                "metric" => {
                    cfg.metric = Metric::parse(value).ok_or_else(|| parse_err("unknown metric"))?
                }
                "noiseless" => {
                    cfg.noiseless = value.parse().map_err(|_| parse_err("expected bool"))?
                }
                "identity_channel" => {
                    cfg.identity_channel =
                        value.parse().map_err(|_| parse_err("expected bool"))?
                }
                "workers" => {
                    cfg.workers = value.parse().map_err(|_| parse_err("expected integer"))?
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if num_tx.is_some() || users.is_some() {
            let users = users.unwrap_or_else(|| cfg.geometry.users().to_vec());
            let num_tx = num_tx.unwrap_or_else(|| users.iter().sum());
            cfg.geometry = SystemGeometry::new(num_tx, users)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }
}

/// Accepts `start:step:stop` (inclusive stop, within 1e-9 slack) or a comma
/// list of dB values.
pub fn parse_ebno(value: &str) -> Option<Vec<f64>> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return None;
        }
        let start: f64 = parts[0].trim().parse().ok()?;
        let step: f64 = parts[1].trim().parse().ok()?;
        let stop: f64 = parts[2].trim().parse().ok()?;
        if step <= 0.0 || stop < start {
            return None;
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + step * f64::from(k);
            if v > stop + 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        Some(out)
    } else {
        let list: Result<Vec<f64>, _> = value.split(',').map(|v| v.trim().parse()).collect();
        list.ok().filter(|l| !l.is_empty())
    }
}
