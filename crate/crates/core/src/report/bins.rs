use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinAxis {
    PoseYaw,
    PosePitch,
    PoseRoll,
    Motion,
}

impl BinAxis {
    pub fn name(self) -> &'static str {
        match self {
            BinAxis::PoseYaw => "pose-yaw",
            BinAxis::PosePitch => "pose-pitch",
            BinAxis::PoseRoll => "pose-roll",
            BinAxis::Motion => "motion",
        }
    }
}

/// Degree boundaries along one axis. The first and last bins are open
/// ended, so every finite value lands in some bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBinSpec")]
pub struct BinSpec {
    pub axis: BinAxis,
    edges: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBinSpec {
    axis: BinAxis,
    edges: Vec<f64>,
}

impl TryFrom<RawBinSpec> for BinSpec {
    type Error = Error;

    fn try_from(r: RawBinSpec) -> Result<Self> {
        BinSpec::new(r.axis, r.edges)
    }
}

impl BinSpec {
    pub fn new(axis: BinAxis, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("a bin spec needs at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bin edges must be finite and strictly increasing"));
        }
        Ok(BinSpec { axis, edges })
    }

    /// Evenly spaced edges from `lo` to `hi` inclusive.
    pub fn uniform(axis: BinAxis, lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi > lo) {
            return Err(Error::invalid("uniform bins need lo < hi and a positive step"));
        }
        let n = ((hi - lo) / step).round() as usize;
        Self::new(axis, (0..=n).map(|i| lo + step * i as f64).collect())
    }

    /// 10 degree yaw bins over [-90, 90].
    pub fn default_yaw() -> Self {
        Self::uniform(BinAxis::PoseYaw, -90.0, 90.0, 10.0).unwrap()
    }

    /// 10 degree motion bins from 0 to 90, the last one open ended.
    pub fn default_motion() -> Self {
        Self::uniform(BinAxis::Motion, 0.0, 90.0, 10.0).unwrap()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bin of a value; `None` only for NaN.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if v.is_nan() {
            return None;
        }
        let n = self.len();
        // index of the first inner edge above v
        let i = self.edges[1..n].partition_point(|&e| e <= v);
        Some(i)
    }

    /// Nominal `[lower, upper)`; end bins are unbounded outward.
    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        let lo = if bin == 0 { f64::NEG_INFINITY } else { self.edges[bin] };
        let hi = if bin + 1 == self.len() { f64::INFINITY } else { self.edges[bin + 1] };
        (lo, hi)
    }

    pub fn label(&self, bin: usize) -> String {
        let (lo, hi) = self.bounds(bin);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => "all".to_string(),
            (false, true) => format!("<{hi}"),
            (true, false) => format!(">={lo}"),
            (true, true) => format!("[{lo},{hi})"),
        }
    }
}
