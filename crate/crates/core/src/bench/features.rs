use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::embed::{load_provider, write_feature_csv, FeatureRecord};
use crate::report::{aggregate, MetricReport};
use crate::stnet::checkpoint;
use crate::{Error, Result};

use super::clips::{blink_windows, clip_feature, fit_clip, load_crops};
use super::eval::write_report;
use super::layout::OutputLayout;
use super::{thread_pool, BenchConfig, DatasetManifest, ManifestEntry, Target};

/// Where exported features come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSource {
    /// Clip features `z'` of a trained network.
    Network(Target),
    /// Per-frame embeddings of a configured provider.
    Provider(String),
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("provider:") {
            Some(name) => Ok(FeatureSource::Provider(name.to_string())),
            None => s.parse().map(FeatureSource::Network),
        }
    }
}

fn entry_records(
    e: &ManifestEntry,
    source: &FeatureSource,
    cfg: &BenchConfig,
    out: &OutputLayout,
    net: Option<&crate::stnet::StNet>,
    provider: Option<&dyn crate::embed::EmbeddingProvider>,
) -> Result<Vec<FeatureRecord>> {
    match (source, net, provider) {
        (FeatureSource::Network(Target::Blink), Some(net), _) => {
            let label = e.labels.get(Target::Blink.label_key()).cloned();
            blink_windows(e, cfg, net.config())?
                .iter()
                .map(|c| {
                    Ok(FeatureRecord {
                        id: c.id.clone(),
                        label: label.clone(),
                        feature: clip_feature(net, c)?,
                    })
                })
                .collect()
        }
        (FeatureSource::Network(t), Some(net), _) => {
            let clip = fit_clip(&e.id, &load_crops(out, &e.id)?, net.config())?;
            Ok(vec![FeatureRecord {
                id: e.id.clone(),
                label: e.labels.get(t.label_key()).cloned(),
                feature: clip_feature(net, &clip)?,
            }])
        }
        (FeatureSource::Provider(_), _, Some(p)) => load_crops(out, &e.id)?
            .iter()
            .enumerate()
            .map(|(i, f)| {
                Ok(FeatureRecord {
                    id: format!("{}#{i}", e.id),
                    label: e.labels.values().next().cloned(),
                    feature: p.embed_image(f)?,
                })
            })
            .collect(),
        _ => unreachable!("source resolved before the entry loop"),
    }
}

/// Writes `features/<source>.csv` with one row per clip (per slice for the
/// blink network, per frame for a provider). Entries without usable inputs
/// are skipped with a warning.
pub fn run_features(manifest: &DatasetManifest, cfg: &BenchConfig, source: &FeatureSource) -> Result<PathBuf> {
    cfg.validate()?;
    let out = OutputLayout::new(&cfg.output_dir);
    let (net, provider, name) = match source {
        FeatureSource::Network(t) => {
            let path = cfg.checkpoint_path(*t).unwrap_or_else(|| out.checkpoint(*t));
            let ck = checkpoint::load(&path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            (Some(ck.net), None, t.name().to_string())
        }
        FeatureSource::Provider(n) => {
            let pc = cfg
                .providers
                .iter()
                .find(|p| &p.name == n)
                .ok_or_else(|| Error::Config(format!("no provider named `{n}`")))?;
            (None, Some(load_provider(pc)?), n.clone())
        }
    };
    let mut entries: Vec<&ManifestEntry> = manifest.entries.iter().collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let pool = thread_pool(cfg.workers)?;
    let per_entry: Vec<Vec<FeatureRecord>> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| {
                entry_records(e, source, cfg, &out, net.as_ref(), provider.as_deref()).unwrap_or_else(|err| {
                    log::warn!("{}: {err}", e.id);
                    Vec::new()
                })
            })
            .collect()
    });
    fs::create_dir_all(out.features())?;
    let path = out.features().join(format!("{name}.csv"));
    write_feature_csv(&path, &per_entry.concat())?;
    Ok(path)
}

/// Rebuilds a report's aggregates from its per-video records under the
/// configured bins and writes it to `reports/`.
pub fn run_report(input: &Path, cfg: &BenchConfig) -> Result<MetricReport> {
    let old = MetricReport::from_json(&fs::read_to_string(input)?)?;
    let report = aggregate(old.records, old.failures, cfg.bins.clone(), old.set_metrics, old.provenance)?;
    report.verify()?;
    write_report(&report, &OutputLayout::new(&cfg.output_dir))?;
    Ok(report)
}
