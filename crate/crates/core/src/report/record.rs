use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bins::BinAxis;
use super::value::Metric;

/// Pose summary of one generated clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseStats {
    pub mean_pitch: f64,
    pub mean_yaw: f64,
    pub mean_roll: f64,
    /// Max minus min of the configured axis over the clip.
    pub motion: f64,
}

/// Everything measured on one real/generated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub real_id: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub metrics: BTreeMap<String, Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseStats>,
    /// Yaw of the reference (identity source) frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_yaw: Option<f64>,
}

impl VideoRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.0)
    }

    /// The statistic a bin axis groups by.
    pub fn statistic(&self, axis: BinAxis) -> Option<f64> {
        let p = self.pose?;
        Some(match axis {
            BinAxis::PoseYaw => p.mean_yaw,
            BinAxis::PosePitch => p.mean_pitch,
            BinAxis::PoseRoll => p.mean_roll,
            BinAxis::Motion => p.motion,
        })
    }

    fn sort_key(&self) -> (&str, &str, &str) {
        (&self.method, &self.video_id, &self.real_id)
    }
}

pub(crate) fn sort_records(records: &mut [VideoRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// An entry that could not be processed, and why.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureRecord {
    pub id: String,
    pub stage: String,
    pub error: String,
}
