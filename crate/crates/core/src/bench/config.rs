use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blinkdata::BlinkSliceConfig;
use crate::embed::{Modality, ProviderConfig};
use crate::geom::{CropConfig, PoseAxis, SmoothingConfig};
use crate::report::BinSpec;
use crate::stnet::{Head, STNetConfig};
use crate::{Error, Result};

use super::Target;

/// Per-metric switches. Semantic metrics need a trained checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricToggles {
    pub arcsim: bool,
    pub ssim: bool,
    pub psnr: bool,
    pub cpbd: bool,
    pub fid: bool,
    pub lrsd: bool,
    pub esd: bool,
    pub bsd: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        MetricToggles {
            arcsim: true,
            ssim: true,
            psnr: true,
            cpbd: true,
            fid: true,
            lrsd: false,
            esd: false,
            bsd: false,
        }
    }
}

impl MetricToggles {
    pub fn semantic_off(self) -> Self {
        MetricToggles {
            lrsd: false,
            esd: false,
            bsd: false,
            ..self
        }
    }

    /// The network a metric reads its features from.
    pub fn required_networks(&self) -> Vec<Target> {
        let mut out = Vec::new();
        if self.lrsd {
            out.push(Target::Lipreading);
        }
        if self.esd {
            out.push(Target::Emotion);
        }
        if self.bsd {
            out.push(Target::Blink);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NetSize {
    /// The full-width network.
    #[default]
    Full,
    /// A narrow variant for quick runs and tests.
    Small,
}

/// Input geometry and optimisation settings of one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub size: NetSize,
    pub head: Head,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Extra angular-margin epochs after a softmax run.
    pub arc_epochs: usize,
}

impl NetworkSection {
    pub fn stnet_config(&self, classes: usize) -> STNetConfig {
        match self.size {
            NetSize::Full => STNetConfig {
                frames: self.frames,
                height: self.height,
                width: self.width,
                channels: self.channels,
                num_classes: classes,
                ..STNetConfig::default()
            },
            NetSize::Small => {
                STNetConfig::small(self.frames, self.height, self.width, self.channels, classes)
            }
        }
    }
}

/// A section as written in a config file; missing keys keep the
/// target's defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartialSection {
    frames: Option<usize>,
    height: Option<usize>,
    width: Option<usize>,
    channels: Option<usize>,
    size: Option<NetSize>,
    head: Option<Head>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    arc_epochs: Option<usize>,
}

impl PartialSection {
    fn apply(self, s: &mut NetworkSection) {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        take!(frames, height, width, channels, size, head, epochs, batch_size, learning_rate, arc_epochs);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworksConfig {
    pub lipreading: NetworkSection,
    pub emotion: NetworkSection,
    pub blink: NetworkSection,
}

impl<'de> Deserialize<'de> for NetworksConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Default, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        struct Raw {
            lipreading: PartialSection,
            emotion: PartialSection,
            blink: PartialSection,
        }
        let raw = Raw::deserialize(d)?;
        let mut out = NetworksConfig::default();
        raw.lipreading.apply(&mut out.lipreading);
        raw.emotion.apply(&mut out.emotion);
        raw.blink.apply(&mut out.blink);
        Ok(out)
    }
}

impl Default for NetworksConfig {
    fn default() -> Self {
        NetworksConfig {
            lipreading: NetworkSection {
                frames: 29,
                height: 88,
                width: 88,
                channels: 1,
                size: NetSize::Full,
                head: Head::Softmax,
                epochs: 20,
                batch_size: 16,
                learning_rate: 1e-3,
                arc_epochs: 0,
            },
            emotion: NetworkSection {
                frames: 29,
                height: 88,
                width: 88,
                channels: 3,
                size: NetSize::Full,
                head: Head::Softmax,
                epochs: 20,
                batch_size: 16,
                learning_rate: 1e-3,
                arc_epochs: 5,
            },
            blink: NetworkSection {
                frames: 12,
                height: 32,
                width: 64,
                channels: 1,
                size: NetSize::Full,
                head: Head::Softmax,
                epochs: 20,
                batch_size: 16,
                learning_rate: 1e-3,
                arc_epochs: 5,
            },
        }
    }
}

impl NetworksConfig {
    pub fn section(&self, target: Target) -> &NetworkSection {
        match target {
            Target::Lipreading => &self.lipreading,
            Target::Emotion => &self.emotion,
            Target::Blink => &self.blink,
        }
    }

    pub fn section_mut(&mut self, target: Target) -> &mut NetworkSection {
        match target {
            Target::Lipreading => &mut self.lipreading,
            Target::Emotion => &mut self.emotion,
            Target::Blink => &mut self.blink,
        }
    }
}

/// Checkpoint used by each semantic metric; relative paths are taken
/// against the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CheckpointPaths {
    pub lipreading: Option<PathBuf>,
    pub emotion: Option<PathBuf>,
    pub blink: Option<PathBuf>,
}

impl CheckpointPaths {
    pub fn get(&self, target: Target) -> Option<&PathBuf> {
        match target {
            Target::Lipreading => self.lipreading.as_ref(),
            Target::Emotion => self.emotion.as_ref(),
            Target::Blink => self.blink.as_ref(),
        }
    }

    pub fn set(&mut self, target: Target, path: PathBuf) {
        match target {
            Target::Lipreading => self.lipreading = Some(path),
            Target::Emotion => self.emotion = Some(path),
            Target::Blink => self.blink = Some(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Frame rate assumed for landmark files that do not state one.
    pub frame_rate: f64,
    pub smoothing: SmoothingConfig,
    pub crop: CropConfig,
    /// Axis whose max-min spread is the head motion score.
    pub motion_axis: PoseAxis,
    pub bins: Vec<BinSpec>,
    pub providers: Vec<ProviderConfig>,
    pub metrics: MetricToggles,
    pub checkpoints: CheckpointPaths,
    pub networks: NetworksConfig,
    pub lexicon_size: usize,
    pub blink: BlinkSliceConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            workers: 0,
            output_dir: PathBuf::from("headbench-out"),
            frame_rate: 25.0,
            smoothing: SmoothingConfig::default(),
            crop: CropConfig::default(),
            motion_axis: PoseAxis::Yaw,
            bins: vec![BinSpec::default_yaw(), BinSpec::default_motion()],
            providers: vec![
                ProviderConfig::stub("identity", Modality::FaceIdentity, 16),
                ProviderConfig::stub("inception", Modality::ImageInception, 16),
            ],
            metrics: MetricToggles::default(),
            checkpoints: CheckpointPaths::default(),
            networks: NetworksConfig::default(),
            lexicon_size: 300,
            blink: BlinkSliceConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        SmoothingConfig::new(self.smoothing.window_size, self.smoothing.boundary_policy)
            .map_err(cfg_err)?;
        self.crop.validate().map_err(cfg_err)?;
        self.blink.validate().map_err(cfg_err)?;
        if !(self.frame_rate > 0.0) {
            return Err(Error::Config("frame rate must be positive".into()));
        }
        if self.lexicon_size == 0 {
            return Err(Error::Config("lexicon size must be positive".into()));
        }
        let mut names: Vec<&str> = self.providers.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("provider names must be unique".into()));
        }
        Ok(())
    }

    pub fn provider(&self, modality: Modality) -> Result<&ProviderConfig> {
        self.providers
            .iter()
            .find(|p| p.modality == modality)
            .ok_or_else(|| Error::Config(format!("no provider configured for {modality:?}")))
    }

    /// Resolved checkpoint path of a network, if one is configured.
    pub fn checkpoint_path(&self, target: Target) -> Option<PathBuf> {
        self.checkpoints.get(target).map(|p| {
            if p.is_relative() {
                self.output_dir.join(p)
            } else {
                p.clone()
            }
        })
    }

    /// Hex sha256 of the canonical JSON form, leaving out the settings
    /// that cannot change results (worker count, output location).
    pub fn hash(&self) -> Result<String> {
        let canonical = BenchConfig {
            workers: 0,
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
