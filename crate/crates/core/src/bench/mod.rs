//! Pipeline harness: dataset manifests, configuration, preprocessing,
//! training, evaluation, feature export and report persistence.
//!
//! Outputs land under the configured directory as `crops/`, `poses/`,
//! `features/`, `checkpoints/` and `reports/`.

mod clips;
mod config;
mod eval;
mod features;
pub mod fixture;
mod layout;
mod manifest;
mod preprocess;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{BenchConfig, CheckpointPaths, MetricToggles, NetSize, NetworkSection, NetworksConfig};
pub use eval::run_eval;
pub use features::{run_features, run_report, FeatureSource};
pub use layout::{load_frames, OutputLayout};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use preprocess::{run_preprocess, EntryLog, EntryStatus, PreprocessSummary};
pub use train::{run_train, TrainingManifest};

use crate::{Error, Result};

/// The network behind a semantic metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lipreading,
    Emotion,
    Blink,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Lipreading => "lipreading",
            Target::Emotion => "emotion",
            Target::Blink => "blink",
        }
    }

    /// Manifest label the network is trained on.
    pub fn label_key(self) -> &'static str {
        match self {
            Target::Lipreading => "word",
            Target::Emotion => "emotion",
            Target::Blink => "blink",
        }
    }

    pub fn metric(self) -> &'static str {
        match self {
            Target::Lipreading => "lrsd",
            Target::Emotion => "esd",
            Target::Blink => "bsd",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipreading" => Ok(Target::Lipreading),
            "emotion" => Ok(Target::Emotion),
            "blink" => Ok(Target::Blink),
            _ => Err(Error::invalid(format!("unknown target `{s}`"))),
        }
    }
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
