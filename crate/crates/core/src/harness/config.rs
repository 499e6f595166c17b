use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::code::Lattice;
use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, Pooling, TrainConfig};
use crate::noise::NoiseModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    /// Network with translation-aware pooling.
    Gapt,
    /// Network with plain global average pooling.
    Gap,
    /// Exhaustive maximum likelihood, 2D `L = 2` only.
    Mld,
    /// Maximum likelihood over errors up to `w_max`.
    MldTruncated,
    /// Always predicts the trivial class.
    Zero,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Gapt => "gapt",
            DecoderKind::Gap => "gap",
            DecoderKind::Mld => "mld",
            DecoderKind::MldTruncated => "mld-truncated",
            DecoderKind::Zero => "zero",
        }
    }

    pub fn pooling(self) -> Option<Pooling> {
        match self {
            DecoderKind::Gapt => Some(Pooling::GapT),
            DecoderKind::Gap => Some(Pooling::Gap),
            _ => None,
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Self::Gapt,
            Self::Gap,
            Self::Mld,
            Self::MldTruncated,
            Self::Zero,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| {
            Error::param(format!(
                "unknown decoder {s:?} (gapt, gap, mld, mld-truncated, zero)"
            ))
        })
    }
}

/// One experiment, loadable from TOML. Unset keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: usize,
    pub dim: usize,
    /// Evaluation error rates.
    pub error_rates: Vec<f64>,
    pub train_error_rate: f64,
    pub train_samples: usize,
    pub eval_samples: usize,
    pub decoder: DecoderKind,
    pub seed: u64,
    pub out: PathBuf,
    /// Lattice sizes of a threshold sweep; empty means just `lattice`.
    pub sweep_lattices: Vec<usize>,
    /// Weight cutoff of the truncated oracle.
    pub w_max: usize,
    pub channels: Vec<usize>,
    pub depth: usize,
    pub kernel: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    pub class_weighting: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let net = NetworkSpec::desk(Pooling::GapT);
        let train = TrainConfig::default();
        Self {
            lattice: 3,
            dim: 3,
            error_rates: vec![0.01],
            train_error_rate: train.p_train,
            train_samples: train.total_samples,
            eval_samples: 1_000_000,
            decoder: DecoderKind::Gapt,
            seed: 0,
            out: PathBuf::from("runs"),
            sweep_lattices: Vec::new(),
            w_max: 3,
            channels: net.channels,
            depth: net.depth,
            kernel: net.kernel,
            batch_size: train.batch_size,
            max_lr: train.max_lr,
            class_weighting: train.class_weighting,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    pub fn validate(&self) -> Result<()> {
        for &l in std::iter::once(&self.lattice).chain(&self.sweep_lattices) {
            Lattice::new(l, self.dim)?;
        }
        if self.error_rates.is_empty() {
            return Err(Error::param("at least one error rate is needed"));
        }
        for &p in self.error_rates.iter().chain([&self.train_error_rate]) {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::param(format!("error rate {p} outside (0, 1)")));
            }
        }
        if self.train_samples == 0 || self.eval_samples == 0 {
            return Err(Error::param("sample counts must be positive"));
        }
        if let Some(pooling) = self.decoder.pooling() {
            self.network_spec(pooling).validate()?;
            self.train_config().validate()?;
        }
        Ok(())
    }

    pub fn lattices(&self) -> Vec<usize> {
        if self.sweep_lattices.is_empty() {
            vec![self.lattice]
        } else {
            self.sweep_lattices.clone()
        }
    }

    pub fn network_spec(&self, pooling: Pooling) -> NetworkSpec {
        NetworkSpec {
            channels: self.channels.clone(),
            depth: self.depth,
            kernel: self.kernel,
            pooling,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size.min(self.train_samples),
            total_samples: self.train_samples,
            max_lr: self.max_lr,
            seed: self.seed,
            p_train: self.train_error_rate,
            class_weighting: self.class_weighting,
            ..TrainConfig::default()
        }
    }

    pub fn noise(&self, p: f64) -> Result<NoiseModel> {
        NoiseModel::new(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = ExperimentConfig::from_toml(
            "lattice = 4\nerror_rates = [0.01, 0.02]\ndecoder = \"gap\"\n",
        )
        .unwrap();
        assert_eq!(c.lattice, 4);
        assert_eq!(c.decoder, DecoderKind::Gap);
        assert_eq!(c.train_samples, 1_000_000);
        assert_eq!(c.eval_samples, 1_000_000);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.train_config().p_train, 0.01);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "error_rates = [1.5]",
            "error_rates = []",
            "train_error_rate = 0.0",
            "eval_samples = 0",
            "lattice = 1",
            "dim = 4",
            "decoder = \"vit\"",
            "unknown_key = 1",
            "channels = []",
        ] {
            assert!(ExperimentConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn decoder_names_parse() {
        for k in [
            DecoderKind::Gapt,
            DecoderKind::Gap,
            DecoderKind::Mld,
            DecoderKind::MldTruncated,
            DecoderKind::Zero,
        ] {
            assert_eq!(k.name().parse::<DecoderKind>().unwrap(), k);
        }
        assert!("bp-osd".parse::<DecoderKind>().is_err());
    }
}
