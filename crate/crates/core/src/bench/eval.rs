use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;

use crate::embed::{load_provider, mean, video_arcsim, EmbeddingProvider, Modality, ProviderConfig, Sharing};
use crate::frame::Frame;
use crate::geom::{head_motion_score, PoseTrace};
use crate::imgq::{cpbd, frechet_distance, gaussian_stats, psnr, ssim, CpbdParams, SsimParams};
use crate::report::{aggregate, FailureRecord, Metric, MetricReport, PoseStats, Provenance, VideoRecord};
use crate::semmet::{bsd_video, esd, l2_distance, lrsd};
use crate::stnet::Checkpoint;
use crate::{Error, Result};

use super::clips::{blink_windows, clip_feature, fit_clip, load_crops};
use super::layout::OutputLayout;
use super::{thread_pool, BenchConfig, DatasetManifest, ManifestEntry, Target};

const PEAK: f64 = 255.0;

/// Everything loaded up front, so configuration problems surface before
/// any clip is touched.
struct EvalContext<'a> {
    cfg: &'a BenchConfig,
    manifest: &'a DatasetManifest,
    out: OutputLayout,
    networks: BTreeMap<Target, Checkpoint>,
    identity: Option<(ProviderConfig, Arc<dyn EmbeddingProvider>)>,
    inception: Option<(ProviderConfig, Arc<dyn EmbeddingProvider>)>,
}

/// Provider handles of one worker.
struct Workers {
    identity: Option<Arc<dyn EmbeddingProvider>>,
    inception: Option<Arc<dyn EmbeddingProvider>>,
}

fn acquire(slot: &Option<(ProviderConfig, Arc<dyn EmbeddingProvider>)>) -> Result<Option<Arc<dyn EmbeddingProvider>>> {
    match slot {
        None => Ok(None),
        Some((_, p)) if p.sharing() == Sharing::Shared => Ok(Some(Arc::clone(p))),
        Some((cfg, _)) => load_provider(cfg).map(Some),
    }
}

/// Real and generated frame features.
type FeaturePair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

struct EntryResult {
    record: VideoRecord,
    /// Inception features of the real and generated frames, for FID.
    fid: Option<FeaturePair>,
}

fn pose_stats(trace: &PoseTrace, cfg: &BenchConfig) -> Option<PoseStats> {
    if trace.is_empty() {
        return None;
    }
    let n = trace.len() as f64;
    let avg = |i: usize| trace.angles.iter().map(|a| a[i]).sum::<f64>() / n;
    Some(PoseStats {
        mean_pitch: avg(0),
        mean_yaw: avg(1),
        mean_roll: avg(2),
        motion: head_motion_score(trace, cfg.motion_axis),
    })
}

fn embed_all(p: &dyn EmbeddingProvider, frames: &[Frame]) -> Result<Vec<Vec<f64>>> {
    frames.iter().map(|f| Ok(p.embed_image(f)?.values().to_vec())).collect()
}

fn eval_entry(ctx: &EvalContext, w: &Result<Workers>, e: &ManifestEntry) -> Result<EntryResult> {
    let w = w.as_ref().map_err(|err| Error::ProviderLoad {
        name: "worker".into(),
        reason: err.to_string(),
    })?;
    let cfg = ctx.cfg;
    let real_id = e.real_id.as_deref().unwrap_or_default();
    let real = ctx
        .manifest
        .get(real_id)
        .ok_or_else(|| Error::Pairing(format!("unknown real clip `{real_id}`")))?;
    let fake_frames = load_crops(&ctx.out, &e.id)?;
    let real_frames = load_crops(&ctx.out, real_id)?;
    if fake_frames.len() != real_frames.len() {
        return Err(Error::Pairing(format!(
            "`{}` has {} frames, `{real_id}` has {}",
            e.id,
            fake_frames.len(),
            real_frames.len()
        )));
    }
    let toggles = cfg.metrics;
    let mut m: BTreeMap<String, Metric> = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        m.insert(k.to_string(), Metric(v));
    };

    if let (true, Some(p)) = (toggles.arcsim, &w.identity) {
        put("arcsim", video_arcsim(&real_frames, &fake_frames, p.as_ref())?.mean);
    }
    if toggles.ssim || toggles.psnr || toggles.cpbd {
        let lr: Vec<_> = real_frames.iter().map(|f| f.luma(PEAK)).collect();
        let lf: Vec<_> = fake_frames.iter().map(|f| f.luma(PEAK)).collect();
        if toggles.ssim {
            let params = SsimParams::default();
            let v = lr.iter().zip(&lf).map(|(a, b)| ssim(a, b, &params)).collect::<Result<Vec<_>>>()?;
            put("ssim", mean(&v));
        }
        if toggles.psnr {
            let v = lr.iter().zip(&lf).map(|(a, b)| psnr(a, b, PEAK)).collect::<Result<Vec<_>>>()?;
            put("psnr", mean(&v));
        }
        if toggles.cpbd {
            let params = CpbdParams::default();
            let v = lf.iter().map(|p| Ok(cpbd(p, PEAK, &params)?.score)).collect::<Result<Vec<_>>>()?;
            put("cpbd", mean(&v));
        }
    }
    for (target, ckpt) in &ctx.networks {
        let net_cfg = ckpt.net.config();
        match target {
            Target::Lipreading | Target::Emotion => {
                let a = clip_feature(&ckpt.net, &fit_clip(real_id, &real_frames, net_cfg)?)?;
                let b = clip_feature(&ckpt.net, &fit_clip(&e.id, &fake_frames, net_cfg)?)?;
                if *target == Target::Lipreading {
                    put("lrsd", lrsd(&a, &b)?);
                    put("l2", l2_distance(&a, &b)?);
                } else {
                    put("esd", esd(&a, &b)?);
                }
            }
            Target::Blink => {
                let feats = |entry: &ManifestEntry| -> Result<Vec<_>> {
                    blink_windows(entry, cfg, net_cfg)?
                        .iter()
                        .map(|c| clip_feature(&ckpt.net, c))
                        .collect()
                };
                put("bsd", bsd_video(&feats(real)?, &feats(e)?)?);
            }
        }
    }
    let fid = match (toggles.fid, &w.inception) {
        (true, Some(p)) => Some((embed_all(p.as_ref(), &real_frames)?, embed_all(p.as_ref(), &fake_frames)?)),
        _ => None,
    };

    let read_pose = |id: &str| -> Result<Option<PoseTrace>> {
        let path = ctx.out.pose_file(id);
        if path.exists() {
            PoseTrace::read_csv(path).map(Some)
        } else {
            Ok(None)
        }
    };
    let pose = read_pose(&e.id)?.and_then(|t| pose_stats(&t, cfg));
    let reference_yaw = read_pose(real_id)?.and_then(|t| t.angles.get(e.reference_frame).map(|a| a[1]));
    let label = e
        .labels
        .get("word")
        .or_else(|| real.labels.get("word"))
        .or_else(|| e.labels.values().next())
        .or_else(|| real.labels.values().next())
        .cloned();

    Ok(EntryResult {
        record: VideoRecord {
            video_id: e.id.clone(),
            real_id: real_id.to_string(),
            method: e.method.clone().unwrap_or_default(),
            label,
            metrics: m,
            pose,
            reference_yaw,
        },
        fid,
    })
}

fn prepare<'a>(manifest: &'a DatasetManifest, cfg: &'a BenchConfig) -> Result<EvalContext<'a>> {
    cfg.validate()?;
    let mut networks = BTreeMap::new();
    for target in cfg.metrics.required_networks() {
        let path = cfg.checkpoint_path(target).ok_or_else(|| {
            Error::Config(format!(
                "metric `{}` is enabled but no {} checkpoint is configured",
                target.metric(),
                target.name()
            ))
        })?;
        if !path.is_file() {
            return Err(Error::Config(format!(
                "{} checkpoint {} does not exist",
                target.name(),
                path.display()
            )));
        }
        let ckpt = crate::stnet::checkpoint::load(&path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        networks.insert(target, ckpt);
    }
    let provider = |on: bool, modality| -> Result<Option<(ProviderConfig, Arc<dyn EmbeddingProvider>)>> {
        if !on {
            return Ok(None);
        }
        let pc = cfg.provider(modality)?.clone();
        let p = load_provider(&pc)?;
        Ok(Some((pc, p)))
    };
    Ok(EvalContext {
        cfg,
        manifest,
        out: OutputLayout::new(&cfg.output_dir),
        networks,
        identity: provider(cfg.metrics.arcsim, Modality::FaceIdentity)?,
        inception: provider(cfg.metrics.fid, Modality::ImageInception)?,
    })
}

/// Scores every generated clip against its real counterpart and writes
/// the report to `reports/`. The report body depends only on the
/// manifest, the configuration and the preprocessed inputs; the wall-clock
/// time goes to `reports/provenance.json`.
pub fn run_eval(manifest: &DatasetManifest, cfg: &BenchConfig) -> Result<MetricReport> {
    let ctx = prepare(manifest, cfg)?;
    let mut entries: Vec<&ManifestEntry> = manifest.generated().collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let pool = thread_pool(cfg.workers)?;
    let results: Vec<(&ManifestEntry, Result<EntryResult>)> = pool.install(|| {
        entries
            .par_iter()
            .map_init(
                || -> Result<Workers> {
                    Ok(Workers {
                        identity: acquire(&ctx.identity)?,
                        inception: acquire(&ctx.inception)?,
                    })
                },
                |w, e| (*e, eval_entry(&ctx, w, e)),
            )
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut fid_sets: BTreeMap<String, FeaturePair> = BTreeMap::new();
    for (e, r) in results {
        match r {
            Ok(r) => {
                if let Some((real, fake)) = r.fid {
                    let slot = fid_sets.entry(r.record.method.clone()).or_default();
                    slot.0.extend(real);
                    slot.1.extend(fake);
                }
                records.push(r.record);
            }
            Err(err) => {
                warn!("{}: {err}", e.id);
                failures.push(FailureRecord {
                    id: e.id.clone(),
                    stage: "eval".into(),
                    error: err.to_string(),
                });
            }
        }
    }
    let mut set_metrics: BTreeMap<String, BTreeMap<String, Metric>> = BTreeMap::new();
    for (method, (real, fake)) in &fid_sets {
        let d = gaussian_stats(real).and_then(|p| frechet_distance(&p, &gaussian_stats(fake)?));
        match d {
            Ok(d) => {
                set_metrics.entry(method.clone()).or_default().insert("fid".into(), Metric(d));
            }
            Err(err) => warn!("{method}: no FID: {err}"),
        }
    }

    let provenance = Provenance {
        config_hash: cfg.hash()?,
        checkpoints: ctx
            .networks
            .iter()
            .map(|(t, c)| (t.name().to_string(), c.fingerprint.clone()))
            .collect(),
        providers: [&ctx.identity, &ctx.inception]
            .into_iter()
            .flatten()
            .map(|(pc, _)| (pc.name.clone(), pc.model_source.clone()))
            .collect(),
        seed: cfg.seed,
    };
    let report = aggregate(records, failures, cfg.bins.clone(), set_metrics, provenance)?;
    write_report(&report, &ctx.out)?;
    info!(
        "eval: {} clips scored, {} failed",
        report.records.len(),
        report.failures.len()
    );
    Ok(report)
}

pub(crate) fn write_report(report: &MetricReport, out: &OutputLayout) -> Result<()> {
    let dir = out.reports();
    report.write_dir(&dir)?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let stamp = serde_json::json!({
        "created_unix": created,
        "config_hash": report.provenance.config_hash,
    });
    fs::write(dir.join("provenance.json"), serde_json::to_string_pretty(&stamp)? + "\n")?;
    Ok(())
}
