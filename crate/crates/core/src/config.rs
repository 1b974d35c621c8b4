//! Run configuration.
//!
//! Values are resolved in this order, later sources winning:
//!
//! 1. the named profile (`paper` or `desk`),
//! 2. the TOML config file,
//! 3. environment variables (`MFRPN_SEED`),
//! 4. command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util;
use crate::metrics::MetricConfig;
use crate::nnet::{AdamConfig, Precision};
use crate::rpn::TrainConfig;

pub const SEED_ENV: &str = "MFRPN_SEED";
pub const JOBS_ENV: &str = "MFRPN_JOBS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Deterministic,
    SfHfRpn,
    #[default]
    MfRpn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Deterministic => "deterministic",
            Self::SfHfRpn => "sf-hf-rpn",
            Self::MfRpn => "mf-rpn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Self::Deterministic),
            "sf-hf-rpn" => Ok(Self::SfHfRpn),
            "mf-rpn" => Ok(Self::MfRpn),
            "lf-rpn" => Err(Error::InvalidConfig(
                "lf-rpn is not trained on its own: train an mf-rpn model, then run `eval --extract-lf` on its checkpoint".into(),
            )),
            other => Err(Error::InvalidConfig(format!(
                "unknown model {other:?}; expected deterministic, sf-hf-rpn or mf-rpn"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Paper,
    #[default]
    Desk,
}

impl Profile {
    pub fn train_config(self) -> TrainConfig {
        match self {
            Self::Paper => TrainConfig::default(),
            Self::Desk => TrainConfig {
                members: 8,
                hidden_dims: vec![32, 32],
                hf_hidden_dims: vec![32, 32],
                steps: 5000,
                batch_size: 256,
                hf_batch_size: 256,
                adam: AdamConfig {
                    base_lr: 1e-3,
                    ..AdamConfig::default()
                },
                trace_every: 100,
                ..TrainConfig::default()
            },
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(Error::InvalidConfig(format!(
                "unknown profile {other:?}; expected paper or desk"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSource {
    LfStats,
    HfStats,
}

impl FromStr for NormSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lf-stats" => Ok(Self::LfStats),
            "hf-stats" => Ok(Self::HfStats),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalization source {other:?}; expected lf-stats or hf-stats"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lf: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hf: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub model: ModelKind,
    /// Defaults to `lf-stats` for `mf-rpn` and `hf-stats` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormSource>,
    pub precision: Precision,
    #[serde(default)]
    pub data: DataPaths,
    pub train: TrainConfig,
    #[serde(default)]
    pub metrics: MetricConfig,
}

impl RunConfig {
    pub fn from_profile(profile: Profile) -> Self {
        Self {
            profile,
            model: ModelKind::MfRpn,
            normalization: None,
            precision: Precision::F64,
            data: DataPaths::default(),
            train: profile.train_config(),
            metrics: MetricConfig::default(),
        }
    }

    /// Profile defaults overlaid with the file's values. The profile comes
    /// from `profile_override`, then the file's `profile` key, then `desk`.
    pub fn load(path: Option<&Path>, profile_override: Option<Profile>) -> Result<Self> {
        let file: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse()
                    .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let profile = match (profile_override, file.get("profile")) {
            (Some(p), _) => p,
            (None, Some(v)) => v
                .as_str()
                .ok_or_else(|| Error::InvalidConfig("profile must be a string".into()))?
                .parse()?,
            (None, None) => Profile::default(),
        };
        let mut base = toml::Table::try_from(Self::from_profile(profile))
            .map_err(|e| Error::InvalidState(e.to_string()))?;
        merge(&mut base, file);
        base.insert("profile".into(), toml::Value::String(profile_name(profile).into()));
        let mut cfg: Self = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        if let Some(dir) = path.and_then(Path::parent) {
            cfg.data.lf = cfg.data.lf.map(|p| dir.join(p));
            cfg.data.hf = cfg.data.hf.map(|p| dir.join(p));
        }
        Ok(cfg)
    }

    /// Applies `MFRPN_SEED` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.ensemble_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(())
    }

    pub fn normalization_source(&self) -> NormSource {
        self.normalization.unwrap_or(match self.model {
            ModelKind::MfRpn => NormSource::LfStats,
            _ => NormSource::HfStats,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.precision.ensure_supported()?;
        self.train.validate()?;
        self.metrics.validate()?;
        if self.data.hf.is_none() {
            return Err(Error::InvalidConfig("no high-fidelity training data (data.hf / --hf)".into()));
        }
        let needs_lf = self.model == ModelKind::MfRpn || self.normalization_source() == NormSource::LfStats;
        if needs_lf && self.data.lf.is_none() {
            return Err(Error::InvalidConfig(format!(
                "model {} with {:?} normalization needs low-fidelity data (data.lf / --lf)",
                self.model,
                self.normalization_source()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io_util::write_toml(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        io_util::read_toml(path)
    }
}

fn profile_name(p: Profile) -> &'static str {
    match p {
        Profile::Paper => "paper",
        Profile::Desk => "desk",
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parallelism from `MFRPN_JOBS`, if set.
pub fn jobs_from_env() -> Result<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{JOBS_ENV}={v:?} is not a count"))),
        Err(_) => Ok(None),
    }
}
