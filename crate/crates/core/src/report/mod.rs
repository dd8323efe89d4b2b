//! Conditioned analysis of per-video results: pose and motion histograms,
//! metric-versus-bin curves, pose confusion matrices, trend traces and
//! per-method tables.
//!
//! Every aggregate is a function of the per-video records alone and is
//! independent of their order.

mod analysis;
mod bins;
mod record;
mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use analysis::{
    histogram, metric_vs_bin, pose_confusion_matrix, record_pose_pairs, trend_trace, windowed_fid,
    BinStat, Cell, ConfusionMatrix, Histogram, PosePairSample, TrendTrace,
};
pub use bins::{BinAxis, BinSpec};
pub use record::{FailureRecord, PoseStats, VideoRecord};
pub use value::{cell, stable_mean, Metric};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStat {
    pub mean: Metric,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregates {
    /// method -> metric -> mean over videos.
    pub per_method: BTreeMap<String, BTreeMap<String, MeanStat>>,
    /// method -> axis -> metric -> populated bins.
    pub per_bin: BTreeMap<String, BTreeMap<String, BTreeMap<String, Vec<BinStat>>>>,
    /// method -> axis -> distribution of the axis statistic.
    pub histograms: BTreeMap<String, BTreeMap<String, Histogram>>,
    /// method -> metric -> reference yaw x clip yaw.
    pub confusion: BTreeMap<String, BTreeMap<String, ConfusionMatrix>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub config_hash: String,
    /// Network name -> checkpoint fingerprint.
    pub checkpoints: BTreeMap<String, String>,
    /// Provider name -> model source.
    pub providers: BTreeMap<String, String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub bins: Vec<BinSpec>,
    pub records: Vec<VideoRecord>,
    pub failures: Vec<FailureRecord>,
    /// Set-level statistics such as FID: method -> name -> value.
    pub set_metrics: BTreeMap<String, BTreeMap<String, Metric>>,
    pub aggregates: Aggregates,
}

fn metric_names(records: &[VideoRecord]) -> BTreeSet<String> {
    records.iter().flat_map(|r| r.metrics.keys().cloned()).collect()
}

fn compute(records: &[VideoRecord], bins: &[BinSpec]) -> Result<Aggregates> {
    let mut by_method: BTreeMap<&str, Vec<VideoRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(&r.method).or_default().push(r.clone());
    }
    let names = metric_names(records);
    let yaw_spec = bins.iter().find(|b| b.axis == BinAxis::PoseYaw);
    let mut agg = Aggregates::default();
    for (method, recs) in by_method {
        let mut means = BTreeMap::new();
        for name in &names {
            let mut vals: Vec<f64> = recs.iter().filter_map(|r| r.metric(name)).collect();
            if !vals.is_empty() {
                means.insert(
                    name.clone(),
                    MeanStat {
                        count: vals.len(),
                        mean: Metric(stable_mean(&mut vals)),
                    },
                );
            }
        }
        agg.per_method.insert(method.to_string(), means);

        let mut per_axis = BTreeMap::new();
        let mut hists = BTreeMap::new();
        for spec in bins {
            let stats: Vec<f64> = recs.iter().filter_map(|r| r.statistic(spec.axis)).collect();
            if stats.is_empty() {
                continue;
            }
            hists.insert(spec.axis.name().to_string(), histogram(&stats, spec)?);
            let curves = names
                .iter()
                .map(|n| (n.clone(), metric_vs_bin(&recs, n, spec)))
                .filter(|(_, c)| !c.is_empty())
                .collect();
            per_axis.insert(spec.axis.name().to_string(), curves);
        }
        agg.per_bin.insert(method.to_string(), per_axis);
        agg.histograms.insert(method.to_string(), hists);

        if let Some(spec) = yaw_spec {
            let mut mats = BTreeMap::new();
            for n in &names {
                let samples = record_pose_pairs(&recs, n);
                if !samples.is_empty() {
                    mats.insert(n.clone(), pose_confusion_matrix(&samples, spec)?);
                }
            }
            if !mats.is_empty() {
                agg.confusion.insert(method.to_string(), mats);
            }
        }
    }
    Ok(agg)
}

/// Builds the report; records and failures are sorted so that the output
/// does not depend on input order.
pub fn aggregate(
    mut records: Vec<VideoRecord>,
    mut failures: Vec<FailureRecord>,
    bins: Vec<BinSpec>,
    set_metrics: BTreeMap<String, BTreeMap<String, Metric>>,
    provenance: Provenance,
) -> Result<MetricReport> {
    record::sort_records(&mut records);
    failures.sort();
    let aggregates = compute(&records, &bins)?;
    Ok(MetricReport {
        schema_version: SCHEMA_VERSION,
        provenance,
        bins,
        records,
        failures,
        set_metrics,
        aggregates,
    })
}

impl MetricReport {
    /// Recomputes every aggregate from the records and compares.
    pub fn verify(&self) -> Result<()> {
        if compute(&self.records, &self.bins)? != self.aggregates {
            return Err(Error::Precondition(
                "report aggregates do not match its per-video records".into(),
            ));
        }
        Ok(())
    }

    pub fn metric_names(&self) -> BTreeSet<String> {
        metric_names(&self.records)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MetricReport = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::format(
                "report",
                format!("schema version {} is not {SCHEMA_VERSION}", r.schema_version),
            ));
        }
        Ok(r)
    }

    pub fn records_csv(&self) -> Result<String> {
        let names: Vec<String> = self.metric_names().into_iter().collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "video_id", "real_id", "method", "label", "yaw", "pitch", "roll", "motion", "reference_yaw",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(cell).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.video_id.clone(),
                r.real_id.clone(),
                r.method.clone(),
                r.label.clone().unwrap_or_default(),
                opt(r.pose.map(|p| p.mean_yaw)),
                opt(r.pose.map(|p| p.mean_pitch)),
                opt(r.pose.map(|p| p.mean_roll)),
                opt(r.pose.map(|p| p.motion)),
                opt(r.reference_yaw),
            ];
            row.extend(names.iter().map(|n| opt(r.metric(n))));
            w.write_record(&row)?;
        }
        csv_string(w)
    }

    pub fn per_method_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "metric", "mean", "count"])?;
        for (m, metrics) in &self.aggregates.per_method {
            for (name, s) in metrics {
                w.write_record([m.as_str(), name, &cell(s.mean.0), &s.count.to_string()])?;
            }
        }
        for (m, metrics) in &self.set_metrics {
            for (name, v) in metrics {
                w.write_record([m.as_str(), name, &cell(v.0), ""])?;
            }
        }
        csv_string(w)
    }

    pub fn per_bin_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "axis", "metric", "bin", "label", "mean", "count"])?;
        for (m, axes) in &self.aggregates.per_bin {
            for (axis, metrics) in axes {
                for (name, stats) in metrics {
                    for s in stats {
                        w.write_record([
                            m.as_str(),
                            axis,
                            name,
                            &s.bin.to_string(),
                            &s.label,
                            &cell(s.mean.0),
                            &s.count.to_string(),
                        ])?;
                    }
                }
            }
        }
        csv_string(w)
    }

    pub fn failures_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "stage", "error"])?;
        for f in &self.failures {
            w.write_record([&f.id, &f.stage, &f.error])?;
        }
        csv_string(w)
    }

    /// Writes `report.json` plus CSV tables and confusion TSVs into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        fs::write(dir.join("records.csv"), self.records_csv()?)?;
        fs::write(dir.join("per_method.csv"), self.per_method_csv()?)?;
        fs::write(dir.join("per_bin.csv"), self.per_bin_csv()?)?;
        fs::write(dir.join("failures.csv"), self.failures_csv()?)?;
        for (method, mats) in &self.aggregates.confusion {
            for (metric, m) in mats {
                fs::write(dir.join(format!("confusion_{method}_{metric}.tsv")), confusion_tsv(m))?;
            }
        }
        Ok(())
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format("csv", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::format("csv", e))
}

/// Rows are reference bins, columns target bins; empty cells stay blank.
pub fn confusion_tsv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("reference\\target");
    for l in &m.labels {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    for (label, row) in m.labels.iter().zip(&m.cells) {
        out.push_str(label);
        for c in row {
            out.push('\t');
            if let Some(c) = c {
                out.push_str(&cell(c.mean.0));
            }
        }
        out.push('\n');
    }
    out
}
