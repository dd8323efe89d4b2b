use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bins::BinSpec;
use super::record::VideoRecord;
use super::value::{stable_mean, Metric};
use crate::geom::PoseTrace;
use crate::imgq::{frechet_distance, gaussian_stats};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
    pub ratios: Vec<f64>,
    pub labels: Vec<String>,
}

/// Counts per bin and their share of all values. NaN values are rejected.
pub fn histogram(values: &[f64], spec: &BinSpec) -> Result<Histogram> {
    let mut counts = vec![0usize; spec.len()];
    for &v in values {
        let b = spec.bin_of(v).ok_or_else(|| Error::invalid("cannot bin NaN"))?;
        counts[b] += 1;
    }
    let n = values.len();
    let ratios = counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect();
    Ok(Histogram {
        counts,
        ratios,
        labels: (0..spec.len()).map(|b| spec.label(b)).collect(),
    })
}

/// Mean of a metric in one populated bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub bin: usize,
    pub label: String,
    pub mean: Metric,
    pub count: usize,
}

/// Per-bin mean of `metric` over records carrying both the metric and the
/// axis statistic. Empty bins are absent from the result.
pub fn metric_vs_bin(records: &[VideoRecord], metric: &str, spec: &BinSpec) -> Vec<BinStat> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        let (Some(v), Some(s)) = (r.metric(metric), r.statistic(spec.axis)) else {
            continue;
        };
        if let Some(b) = spec.bin_of(s) {
            groups.entry(b).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .map(|(bin, mut vals)| BinStat {
            bin,
            label: spec.label(bin),
            count: vals.len(),
            mean: Metric(stable_mean(&mut vals)),
        })
        .collect()
}

/// One sample for the pose confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosePairSample {
    pub reference: f64,
    pub target: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: Metric,
    pub count: usize,
}

/// `cells[i][j]` averages samples with reference bin `i` and target bin
/// `j`; cells without samples are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<Option<Cell>>>,
}

pub fn pose_confusion_matrix(samples: &[PosePairSample], spec: &BinSpec) -> Result<ConfusionMatrix> {
    let n = spec.len();
    let mut groups: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
    for s in samples {
        let i = spec.bin_of(s.reference).ok_or_else(|| Error::invalid("reference pose is NaN"))?;
        let j = spec.bin_of(s.target).ok_or_else(|| Error::invalid("target pose is NaN"))?;
        groups[i][j].push(s.value);
    }
    let cells = groups
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|mut v| {
                    (!v.is_empty()).then(|| Cell {
                        count: v.len(),
                        mean: Metric(stable_mean(&mut v)),
                    })
                })
                .collect()
        })
        .collect();
    Ok(ConfusionMatrix {
        labels: (0..n).map(|b| spec.label(b)).collect(),
        cells,
    })
}

/// Confusion samples from per-video records: reference yaw against the
/// clip's mean yaw.
pub fn record_pose_pairs(records: &[VideoRecord], metric: &str) -> Vec<PosePairSample> {
    records
        .iter()
        .filter_map(|r| {
            Some(PosePairSample {
                reference: r.reference_yaw?,
                target: r.pose?.mean_yaw,
                value: r.metric(metric)?,
            })
        })
        .collect()
}

/// Frame-aligned pose and per-frame metric series of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTrace {
    pub video_id: String,
    pub yaw: Vec<f64>,
    pub series: BTreeMap<String, Vec<f64>>,
}

pub fn trend_trace(video_id: &str, pose: &PoseTrace, series: BTreeMap<String, Vec<f64>>) -> Result<TrendTrace> {
    let yaw: Vec<f64> = pose.axis(crate::geom::PoseAxis::Yaw).collect();
    if let Some((name, s)) = series.iter().find(|(_, s)| s.len() != yaw.len()) {
        return Err(Error::invalid(format!(
            "series {name} has {} frames, pose trace has {}",
            s.len(),
            yaw.len()
        )));
    }
    Ok(TrendTrace {
        video_id: video_id.to_string(),
        yaw,
        series,
    })
}

impl TrendTrace {
    pub fn len(&self) -> usize {
        self.yaw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yaw.is_empty()
    }

    /// The first `n` frames.
    pub fn truncate(&self, n: usize) -> TrendTrace {
        TrendTrace {
            video_id: self.video_id.clone(),
            yaw: self.yaw.iter().take(n).copied().collect(),
            series: self
                .series
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().take(n).copied().collect()))
                .collect(),
        }
    }

    /// Tab-separated table: `frame`, `yaw`, then one column per series.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("frame\tyaw");
        for k in self.series.keys() {
            out.push('\t');
            out.push_str(k);
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{i}\t{}", super::value::cell(self.yaw[i])));
            for v in self.series.values() {
                out.push('\t');
                out.push_str(&super::value::cell(v[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-frame stand-in for FID: the Fréchet distance between Gaussian fits
/// of real and generated features inside a window of `2 * half + 1` frames
/// centred on each frame (clipped at the ends). This is a windowed proxy,
/// not the set-level FID.
pub fn windowed_fid<R: AsRef<[f64]>>(real: &[R], fake: &[R], half: usize) -> Result<Vec<f64>> {
    if real.len() != fake.len() {
        return Err(Error::Pairing(format!("{} real vs {} generated frames", real.len(), fake.len())));
    }
    let n = real.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let half = half.max(1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let p = gaussian_stats(&real[lo..hi])?;
            let q = gaussian_stats(&fake[lo..hi])?;
            frechet_distance(&p, &q)
        })
        .collect()
}
