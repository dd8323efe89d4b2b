use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use log::{info, warn};
use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arcloss::{arcloss_with_grad, ArcLossParams, ArcMargin};
use super::checkpoint;
use super::net::{STNetConfig, StNet};
use crate::embed::{FeatureRecord, FeatureVector};
use crate::frame::ClipTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    #[default]
    Softmax,
    ArcLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

/// Settings of one training run, plus its results once finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub dataset_id: String,
    pub labels: Vec<String>,
    pub head: Head,
    pub arc: ArcMargin,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Written after every epoch when set.
    pub checkpoint_path: Option<PathBuf>,
    /// Gradients are summed over this many fixed batch slices, in order,
    /// so results do not depend on the thread count.
    pub grad_chunks: usize,
    #[serde(default)]
    pub final_train_accuracy: Option<f64>,
    #[serde(default)]
    pub final_val_accuracy: Option<f64>,
    #[serde(default)]
    pub log: Vec<EpochLog>,
}

impl TrainRun {
    pub fn new(dataset_id: &str, labels: Vec<String>, head: Head) -> Self {
        TrainRun {
            dataset_id: dataset_id.to_string(),
            labels,
            head,
            arc: ArcMargin::default(),
            epochs: 20,
            batch_size: 16,
            optimizer: AdamConfig::default(),
            seed: 0,
            checkpoint_path: None,
            grad_chunks: 4,
            final_train_accuracy: None,
            final_val_accuracy: None,
            log: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledClip {
    pub clip: ClipTensor,
    pub label: usize,
}

struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    step: i32,
}

impl Adam {
    fn new(cfg: AdamConfig, net: &StNet) -> Self {
        let zeros: Vec<Vec<f32>> = net.tensors().iter().map(|t| vec![0.0; t.2.len()]).collect();
        Adam {
            cfg,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, net: &mut StNet, grad: &StNet) {
        self.step += 1;
        let c = self.cfg;
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let bc1 = 1.0 - b1.powi(self.step);
        let bc2 = 1.0 - b2.powi(self.step);
        let lr = c.learning_rate as f32;
        let grads: Vec<&[f32]> = grad.tensors().into_iter().map(|t| t.2).collect();
        for (((p, g), m), v) in net
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= lr * (mh / (vh.sqrt() + c.eps as f32) + c.weight_decay as f32 * p[i]);
            }
        }
    }
}

fn softmax_grad(logits: &Array1<f32>, y: usize) -> (f64, Array1<f32>) {
    let top = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let z: f64 = logits.iter().map(|&l| (l as f64 - top).exp()).sum();
    let lse = top + z.ln();
    let loss = lse - logits[y] as f64;
    let mut d = logits.mapv(|l| (l as f64 - lse).exp() as f32);
    d[y] -= 1.0;
    (loss, d)
}

/// Loss and accumulated gradient of a slice of a batch.
fn slice_grad(net: &StNet, items: &[&LabeledClip], run: &TrainRun, batch: usize) -> Result<(f64, StNet, usize)> {
    let mut g = net.zeros_like();
    let mut loss = 0.0;
    let mut correct = 0;
    let inv = 1.0 / batch as f32;
    let arc = match run.head {
        Head::ArcLoss => Some(ArcLossParams::new(net.arc_directions(), run.arc.scale, run.arc.margin)?),
        Head::Softmax => None,
    };
    for item in items {
        let x = net.clip_input(&item.clip)?;
        let trace = net.forward_trace(&x);
        match &arc {
            None => {
                let (l, d) = softmax_grad(&trace.logits, item.label);
                loss += l;
                correct += usize::from(argmax(trace.logits.iter().map(|&v| v as f64)) == item.label);
                net.backward(&trace, &Array1::zeros(trace.feature.len()), Some(&(d * inv)), &mut g);
            }
            Some(params) => {
                let f = trace.feature.mapv(|v| v as f64).insert_axis(Axis(0));
                let out = arcloss_with_grad(&f, &[item.label], params)?;
                loss += out.loss;
                let cos = params.cosines(f.row(0))?;
                correct += usize::from(argmax(cos.into_iter()) == item.label);
                let df = out.d_features.row(0).mapv(|v| v as f32 * inv);
                g.arc_w.scaled_add(inv, &out.d_w.mapv(|v| v as f32));
                net.backward(&trace, &df, None, &mut g);
            }
        }
    }
    Ok((loss, g, correct))
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Predicted class of every clip under the given head.
pub fn predict(net: &StNet, clips: &[ClipTensor], head: Head) -> Result<Vec<usize>> {
    let (feats, logits) = net.forward_batch(clips)?;
    match head {
        Head::Softmax => Ok(logits
            .axis_iter(Axis(0))
            .map(|r| argmax(r.iter().map(|&v| v as f64)))
            .collect()),
        Head::ArcLoss => {
            let params = ArcLossParams::new(net.arc_directions(), 1.0, 0.0)?;
            feats
                .axis_iter(Axis(0))
                .map(|r| Ok(argmax(params.cosines(r.mapv(|v| v as f64).view())?.into_iter())))
                .collect()
        }
    }
}

pub fn accuracy(net: &StNet, data: &[LabeledClip], head: Head) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let clips: Vec<ClipTensor> = data.iter().map(|d| d.clip.clone()).collect();
    let pred = predict(net, &clips, head)?;
    let hits = pred.iter().zip(data).filter(|(p, d)| **p == d.label).count();
    Ok(hits as f64 / data.len() as f64)
}

fn check_inputs(cfg: &STNetConfig, train: &[LabeledClip], val: &[LabeledClip], run: &TrainRun) -> Result<()> {
    cfg.validate()?;
    run.arc.validate()?;
    if run.labels.len() != cfg.num_classes {
        return Err(Error::Precondition(format!(
            "{} labels for a {}-class network",
            run.labels.len(),
            cfg.num_classes
        )));
    }
    if run.batch_size == 0 || run.grad_chunks == 0 {
        return Err(Error::invalid("batch size and gradient chunks must be positive"));
    }
    if let Some(bad) = train.iter().chain(val).find(|c| c.label >= cfg.num_classes) {
        return Err(Error::invalid(format!("clip {} has label {} out of range", bad.clip.id, bad.label)));
    }
    let present: HashSet<usize> = train.iter().map(|c| c.label).collect();
    if present.len() < 2 {
        return Err(Error::Precondition(format!(
            "training split has {} distinct classes, need at least 2",
            present.len()
        )));
    }
    let train_ids: HashSet<&str> = train.iter().map(|c| c.clip.id.as_str()).collect();
    if let Some(c) = val.iter().find(|c| train_ids.contains(c.clip.id.as_str())) {
        return Err(Error::Precondition(format!("clip {} is in both splits", c.clip.id)));
    }
    Ok(())
}

/// Sets each class direction to the normalized mean feature of that class.
fn directions_from_class_means(net: &mut StNet, train: &[LabeledClip]) -> Result<()> {
    let clips: Vec<ClipTensor> = train.iter().map(|c| c.clip.clone()).collect();
    let (feats, _) = net.forward_batch(&clips)?;
    let mut sums: BTreeMap<usize, Array1<f32>> = BTreeMap::new();
    for (row, c) in feats.axis_iter(Axis(0)).zip(train) {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            *sums.entry(c.label).or_insert_with(|| Array1::zeros(row.len())) += &(&row / n);
        }
    }
    for (label, s) in sums {
        let n = s.dot(&s).sqrt();
        if n > 0.0 {
            net.arc_w.column_mut(label).assign(&(&s / n));
        }
    }
    Ok(())
}

/// Trains a network with the run's head. An angular margin run can start
/// from a softmax-trained network; its class directions then start at the
/// normalized class-mean features.
pub fn train_classifier(
    cfg: &STNetConfig,
    train: &[LabeledClip],
    val: &[LabeledClip],
    run: &TrainRun,
    warm_start: Option<&StNet>,
) -> Result<(StNet, TrainRun)> {
    check_inputs(cfg, train, val, run)?;
    let mut net = match warm_start {
        Some(w) => {
            if w.config() != cfg {
                return Err(Error::Precondition("warm-start network has a different configuration".into()));
            }
            w.clone()
        }
        None => StNet::new(cfg.clone(), run.seed)?,
    };
    if warm_start.is_some() && run.head == Head::ArcLoss {
        directions_from_class_means(&mut net, train)?;
    }
    let mut adam = Adam::new(run.optimizer, &net);
    let mut run = run.clone();
    run.log.clear();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut last_good: Option<PathBuf> = None;
    for epoch in 0..run.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed.wrapping_add(0x9e37_79b9 * (epoch as u64 + 1)));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut correct = 0;
        for batch in order.chunks(run.batch_size) {
            let items: Vec<&LabeledClip> = batch.iter().map(|&i| &train[i]).collect();
            let per = items.len().div_ceil(run.grad_chunks.min(items.len()));
            let parts = items
                .par_chunks(per)
                .map(|chunk| slice_grad(&net, chunk, &run, items.len()))
                .collect::<Result<Vec<_>>>()?;
            let mut parts = parts.into_iter();
            let (mut loss, mut grad, mut hits) = parts.next().expect("non-empty batch");
            for (l, g, h) in parts {
                loss += l;
                hits += h;
                grad.add_assign(&g);
            }
            if !loss.is_finite() || grad.tensors().iter().any(|t| t.2.iter().any(|v| !v.is_finite())) {
                warn!("non-finite loss in epoch {epoch}");
                return Err(Error::TrainingFault { epoch, last_good });
            }
            adam.update(&mut net, &grad);
            epoch_loss += loss;
            correct += hits;
        }
        let train_acc = correct as f64 / train.len() as f64;
        let val_acc = if val.is_empty() { None } else { Some(accuracy(&net, val, run.head)?) };
        let entry = EpochLog {
            epoch,
            loss: epoch_loss / train.len() as f64,
            train_accuracy: train_acc,
            val_accuracy: val_acc,
        };
        info!(
            "epoch {epoch}: loss {:.4} train {:.3} val {}",
            entry.loss,
            train_acc,
            val_acc.map_or("-".to_string(), |v| format!("{v:.3}"))
        );
        run.log.push(entry);
        run.final_train_accuracy = Some(train_acc);
        run.final_val_accuracy = val_acc;
        if let Some(path) = &run.checkpoint_path {
            checkpoint::save(path, &net, &run)?;
            last_good = Some(path.clone());
        }
    }
    Ok((net, run))
}

/// Clip feature `z'` of every clip, tagged with its id and label.
pub fn extract_features(
    net: &StNet,
    clips: &[ClipTensor],
    labels: Option<&[String]>,
) -> Result<Vec<FeatureRecord>> {
    if let Some(l) = labels {
        if l.len() != clips.len() {
            return Err(Error::invalid(format!("{} labels for {} clips", l.len(), clips.len())));
        }
    }
    let (feats, _) = net.forward_batch(clips)?;
    feats
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| {
            Ok(FeatureRecord {
                id: clips[i].id.clone(),
                label: labels.map(|l| l[i].clone()),
                feature: FeatureVector::from_f32(row.as_slice().unwrap_or(&row.to_vec()))?,
            })
        })
        .collect()
}

/// Mean pairwise cosine between features sharing a label.
pub fn mean_intra_class_cosine(records: &[FeatureRecord]) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            if records[i].label.is_some() && records[i].label == records[j].label {
                total += crate::embed::arcsim(&records[i].feature, &records[j].feature)?;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 2, got: records.len() });
    }
    Ok(total / n as f64)
}
