use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blinkdata::{
    balance, label_frames, read_slice_manifest, resolve_threshold, sample_slices,
    write_slice_manifest, BlinkSlice, ThresholdPolicy,
};
use crate::geom::{eye_open_rates, EyeLayout, LandmarkSequence};
use crate::stnet::{build_lexicon, checkpoint, train_classifier, Head, LabeledClip, TrainRun};
use crate::{Error, Result};

use super::clips::{entry_eye_crops, fit_clip, load_crops};
use super::layout::OutputLayout;
use super::{thread_pool, BenchConfig, DatasetManifest, ManifestEntry, Split, Target};

/// What a training run leaves next to its checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub target: Target,
    pub checkpoint: PathBuf,
    pub fingerprint: String,
    pub config_hash: String,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub run: TrainRun,
}

struct Corpus {
    labels: Vec<String>,
    train: Vec<LabeledClip>,
    val: Vec<LabeledClip>,
}

fn labeled_entries<'a>(m: &'a DatasetManifest, key: &str, split: Split) -> Vec<&'a ManifestEntry> {
    let mut v: Vec<_> = m
        .entries
        .iter()
        .filter(|e| e.split == split && e.labels.contains_key(key))
        .collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

fn clip_corpus(m: &DatasetManifest, cfg: &BenchConfig, target: Target) -> Result<Corpus> {
    let key = target.label_key();
    let train = labeled_entries(m, key, Split::Train);
    let val = labeled_entries(m, key, Split::Val);
    if train.is_empty() {
        return Err(Error::Precondition(format!(
            "no train-split entries carry a `{key}` label"
        )));
    }
    let labels = match target {
        Target::Lipreading => build_lexicon(train.iter().map(|e| &e.labels[key]), cfg.lexicon_size)?,
        _ => train
            .iter()
            .map(|e| e.labels[key].clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let net_cfg = cfg.networks.section(target).stnet_config(labels.len().max(2));
    let out = OutputLayout::new(&cfg.output_dir);
    let load = |entries: &[&ManifestEntry]| -> Result<Vec<LabeledClip>> {
        entries
            .par_iter()
            .filter_map(|e| index.get(e.labels[key].as_str()).map(|&l| (e, l)))
            .map(|(e, label)| {
                let clip = fit_clip(&e.id, &load_crops(&out, &e.id)?, &net_cfg)?;
                Ok(LabeledClip { clip, label })
            })
            .collect()
    };
    Ok(Corpus {
        train: load(&train)?,
        val: load(&val)?,
        labels,
    })
}

/// Slices of the train and validation entries, labeled against one
/// threshold resolved over all train-split open rates.
fn blink_slices(m: &DatasetManifest, cfg: &BenchConfig) -> Result<(Vec<BlinkSlice>, Vec<BlinkSlice>)> {
    let layout = EyeLayout::default();
    let entries: Vec<&ManifestEntry> = m
        .entries
        .iter()
        .filter(|e| matches!(e.split, Split::Train | Split::Val))
        .collect();
    if !entries.iter().any(|e| e.split == Split::Train) {
        return Err(Error::Precondition("no train-split entries for blink training".into()));
    }
    let rates: Vec<(&ManifestEntry, Vec<f64>)> = entries
        .par_iter()
        .map(|e| {
            let lms = LandmarkSequence::read(&e.landmarks, cfg.frame_rate)?;
            Ok((*e, eye_open_rates(&lms, &layout)?))
        })
        .collect::<Result<_>>()?;
    let corpus: Vec<f64> = rates
        .iter()
        .filter(|(e, _)| e.split == Split::Train)
        .flat_map(|(_, r)| r.iter().copied())
        .collect();
    let threshold = resolve_threshold(cfg.blink.threshold, &corpus)?;
    info!("blink: eye closed below open rate {threshold:.4}");
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (e, r) in &rates {
        let states = label_frames(r, ThresholdPolicy::Fixed(threshold), None)?;
        let slices = sample_slices(&e.id, &states, &cfg.blink)?;
        if e.split == Split::Train {
            train.extend(slices);
        } else {
            val.extend(slices);
        }
    }
    Ok((balance(&train, cfg.seed), val))
}

fn slice_clips(
    m: &DatasetManifest,
    cfg: &BenchConfig,
    slices: &[BlinkSlice],
    net: &crate::stnet::STNetConfig,
) -> Result<Vec<LabeledClip>> {
    let ids: BTreeSet<&str> = slices.iter().map(|s| s.video_id.as_str()).collect();
    let crops: BTreeMap<&str, Vec<crate::Frame>> = ids
        .into_par_iter()
        .map(|id| {
            let e = m
                .get(id)
                .ok_or_else(|| Error::Precondition(format!("slice names unknown entry `{id}`")))?;
            Ok((id, entry_eye_crops(e, cfg)?))
        })
        .collect::<Result<_>>()?;
    slices
        .iter()
        .map(|s| {
            let frames = s.frames(&crops[s.video_id.as_str()])?;
            Ok(LabeledClip {
                clip: fit_clip(&format!("{}@{}", s.video_id, s.start), frames, net)?,
                label: s.label as usize,
            })
        })
        .collect()
}

fn blink_corpus(m: &DatasetManifest, cfg: &BenchConfig) -> Result<Corpus> {
    let out = OutputLayout::new(&cfg.output_dir);
    fs::create_dir_all(out.checkpoints())?;
    let (train, val) = blink_slices(m, cfg)?;
    let train_path = out.checkpoints().join("blink_train_slices.jsonl");
    let val_path = out.checkpoints().join("blink_val_slices.jsonl");
    write_slice_manifest(&train_path, &train)?;
    write_slice_manifest(&val_path, &val)?;
    let labels = vec!["non-blink".to_string(), "blink".to_string()];
    let net = cfg.networks.blink.stnet_config(2);
    Ok(Corpus {
        train: slice_clips(m, cfg, &read_slice_manifest(&train_path)?, &net)?,
        val: slice_clips(m, cfg, &read_slice_manifest(&val_path)?, &net)?,
        labels,
    })
}

/// Trains the network behind one semantic metric and writes
/// `checkpoints/<target>.hbst` plus a `<target>.json` training manifest.
pub fn run_train(manifest: &DatasetManifest, cfg: &BenchConfig, target: Target) -> Result<TrainingManifest> {
    cfg.validate()?;
    let out = OutputLayout::new(&cfg.output_dir);
    fs::create_dir_all(out.checkpoints())?;
    let pool = thread_pool(cfg.workers)?;
    let corpus = pool.install(|| match target {
        Target::Blink => blink_corpus(manifest, cfg),
        _ => clip_corpus(manifest, cfg, target),
    })?;
    let section = cfg.networks.section(target);
    let net_cfg = section.stnet_config(corpus.labels.len());
    let ckpt = out.checkpoint(target);
    info!(
        "training {} on {} clips ({} validation), {} classes",
        target.name(),
        corpus.train.len(),
        corpus.val.len(),
        corpus.labels.len()
    );

    let mut run = TrainRun::new(&manifest.name, corpus.labels.clone(), section.head);
    run.epochs = section.epochs;
    run.batch_size = section.batch_size;
    run.optimizer.learning_rate = section.learning_rate;
    run.seed = cfg.seed;
    run.checkpoint_path = Some(ckpt.clone());
    let (mut net, mut run) =
        pool.install(|| train_classifier(&net_cfg, &corpus.train, &corpus.val, &run, None))?;
    if section.head == Head::Softmax && section.arc_epochs > 0 {
        let mut arc = run.clone();
        arc.head = Head::ArcLoss;
        arc.epochs = section.arc_epochs;
        arc.log.clear();
        (net, run) = pool.install(|| train_classifier(&net_cfg, &corpus.train, &corpus.val, &arc, Some(&net)))?;
    }
    let fingerprint = checkpoint::save(&ckpt, &net, &run)?;
    let ids = |v: &[LabeledClip]| v.iter().map(|c| c.clip.id.clone()).collect();
    let tm = TrainingManifest {
        target,
        checkpoint: ckpt,
        fingerprint,
        config_hash: cfg.hash()?,
        train_ids: ids(&corpus.train),
        val_ids: ids(&corpus.val),
        run,
    };
    fs::write(
        out.checkpoints().join(format!("{}.json", target.name())),
        serde_json::to_string_pretty(&tm)? + "\n",
    )?;
    Ok(tm)
}
