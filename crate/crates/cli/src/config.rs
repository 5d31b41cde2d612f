//! Run configuration: one JSON document carrying every tunable of the
//! pipeline. Unknown keys are rejected, the version field is mandatory, and
//! every sub-config is validated on load.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use echograph::agreement::AgreementConfig;
use echograph::bench::BenchProtocol;
use echograph::gcn::{DecoderConfig, EarlyStopConfig, RingTopology};
use echograph::nn::{AdamConfig, EncoderConfig};
use echograph::phantom::{AugmentConfig, PhantomParams};
use echograph::SamplingConfig;

/// Format version accepted by this binary.
pub const CONFIG_VERSION: u32 = 1;

/// Root seeds, one per independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub synth: u64,
    pub model: u64,
    pub train: u64,
    pub bench: u64,
    pub sample: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { synth: 11, model: 22, train: 33, bench: 44, sample: 55 }
    }
}

/// Default artifact locations; command-line flags override these.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigPaths {
    pub data_dir: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Training-loop settings that sit above the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    /// Images are resized to this before entering the encoder; keypoint
    /// targets are normalized coordinates, so they need no adjustment.
    pub image_size: (usize, usize),
    pub early_stop: Option<EarlyStopConfig>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: 300,
            batch_size: 32,
            image_size: (64, 64),
            early_stop: Some(EarlyStopConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory format version (no default): must equal [`CONFIG_VERSION`].
    pub version: u32,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub agreement: AgreementConfig,
    #[serde(default)]
    pub bench: BenchProtocol,
    #[serde(default)]
    pub phantom: PhantomParams,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub paths: ConfigPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            sampling: SamplingConfig::default(),
            encoder: EncoderConfig::default(),
            decoder: DecoderConfig::default(),
            adam: AdamConfig { learning_rate: 2e-3, ..AdamConfig::default() },
            augment: AugmentConfig::identity(),
            agreement: AgreementConfig::default(),
            bench: BenchProtocol::default(),
            phantom: PhantomParams::default(),
            train: TrainSettings::default(),
            seeds: Seeds::default(),
            paths: ConfigPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate().with_context(|| format!("validating config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).context("serializing config")?;
        fs::write(path, text + "\n")
            .with_context(|| format!("writing config {}", path.display()))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("config version {} not supported (expected {CONFIG_VERSION})", self.version);
        }
        self.sampling.validate().context("sampling config")?;
        self.encoder.validate().context("encoder config")?;
        let ring_size = RingTopology::new(&self.sampling).ring_size();
        self.decoder.validate(ring_size).context("decoder config")?;
        self.adam.validate().context("adam config")?;
        self.augment.validate().context("augment config")?;
        self.agreement.validate().context("agreement config")?;
        self.bench.validate().context("bench protocol")?;
        self.phantom.validate().context("phantom params")?;
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 {
            bail!("train epochs and batch_size must be at least 1");
        }
        if t.image_size.0 == 0 || t.image_size.1 == 0 {
            bail!("train image_size must be at least 1x1");
        }
        Ok(())
    }
}

/// The configuration in effect: the file named by `--config`, or defaults.
pub fn load_or_default(config: Option<&Path>) -> Result<RunConfig> {
    match config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let cfg = RunConfig::default();
        cfg.save(&path).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(cfg, back);
        // Saving the loaded copy reproduces the file byte for byte.
        let first = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn version_field_is_mandatory_and_checked() {
        assert!(serde_json::from_str::<RunConfig>("{}").is_err());
        let wrong: RunConfig = serde_json::from_str(r#"{"version": 99}"#).unwrap();
        assert!(wrong.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"version": 1, "optimizer": {}}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn nested_validation_failures_surface() {
        let mut cfg = RunConfig::default();
        cfg.train.epochs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.agreement.filter_threshold = 2.0;
        assert!(cfg.validate().is_err());
    }
}
