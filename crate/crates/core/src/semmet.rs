//! Video-level semantic metrics over network features: lip-reading
//! distance (LRSD), emotion and blink similarity (ESD, BSD) and top-k
//! accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, mean, FeatureVector};
use crate::{Error, Result};

/// A feature together with the fingerprint of the checkpoint that made it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedFeature {
    pub checkpoint: String,
    pub feature: FeatureVector,
}

/// Real and generated clip of one pair with per-network features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedClipRecord {
    pub real_id: String,
    pub fake_id: String,
    pub method: String,
    pub label: Option<String>,
    /// Keyed by network name, e.g. `lipreading`.
    pub real: BTreeMap<String, TaggedFeature>,
    pub fake: BTreeMap<String, TaggedFeature>,
}

impl PairedClipRecord {
    /// Both features of `network`, after checking they share a checkpoint.
    pub fn pair(&self, network: &str) -> Result<(&FeatureVector, &FeatureVector)> {
        let missing = |side: &str| {
            Error::Pairing(format!(
                "{side} clip of {} / {} has no {network} feature",
                self.real_id, self.fake_id
            ))
        };
        let r = self.real.get(network).ok_or_else(|| missing("real"))?;
        let f = self.fake.get(network).ok_or_else(|| missing("generated"))?;
        same_checkpoint(r, f)?;
        Ok((&r.feature, &f.feature))
    }
}

pub fn same_checkpoint(a: &TaggedFeature, b: &TaggedFeature) -> Result<()> {
    if a.checkpoint != b.checkpoint {
        return Err(Error::Pairing(format!(
            "features come from different checkpoints ({} vs {})",
            a.checkpoint, b.checkpoint
        )));
    }
    Ok(())
}

fn same_dim(a: &FeatureVector, b: &FeatureVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Pairing(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Squared Euclidean distance, lower is better.
pub fn lrsd(real: &FeatureVector, fake: &FeatureVector) -> Result<f64> {
    same_dim(real, fake)?;
    Ok(real
        .values()
        .iter()
        .zip(fake.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Plain Euclidean distance, reported next to [`lrsd`].
pub fn l2_distance(real: &FeatureVector, fake: &FeatureVector) -> Result<f64> {
    Ok(lrsd(real, fake)?.sqrt())
}

fn similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    same_dim(a, b)?;
    cosine(a, b).map_err(|e| match e {
        Error::DegenerateEmbedding(m) => Error::DegenerateFeature(m),
        other => other,
    })
}

/// Emotion similarity: cosine of emotion features, higher is better.
pub fn esd(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    similarity(a, b)
}

/// Blink similarity of one slice pair: cosine of blink features.
pub fn bsd(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    similarity(a, b)
}

/// Mean slice-level blink similarity of a video pair.
pub fn bsd_video(real: &[FeatureVector], fake: &[FeatureVector]) -> Result<f64> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::Pairing(format!(
            "{} real slices vs {} generated slices",
            real.len(),
            fake.len()
        )));
    }
    let s = real
        .iter()
        .zip(fake)
        .map(|(a, b)| bsd(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&s))
}

/// Fraction of rows whose label is among the `k` largest logits. Equal
/// logits rank by class index, lower first.
pub fn topk_accuracy<R: AsRef<[f64]>>(logits: &[R], labels: &[usize], k: usize) -> Result<f64> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::invalid(format!(
            "{} logit rows for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let mut hits = 0usize;
    for (row, &y) in logits.iter().zip(labels) {
        let row = row.as_ref();
        if k == 0 || k > row.len() {
            return Err(Error::invalid(format!("k = {k} outside [1, {}]", row.len())));
        }
        if y >= row.len() {
            return Err(Error::invalid(format!("label {y} outside [0, {})", row.len())));
        }
        let ty = row[y];
        let rank = row
            .iter()
            .enumerate()
            .filter(|&(j, &v)| v > ty || (v == ty && j < y))
            .count();
        hits += usize::from(rank < k);
    }
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAccuracy {
    pub word: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy per word in vocabulary order; words never seen are left out.
pub fn per_word_accuracy<S: AsRef<str>>(
    predictions: &[S],
    labels: &[S],
    vocabulary: &[S],
) -> Result<Vec<WordAccuracy>> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid("predictions and labels differ in length"));
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (p, l) in predictions.iter().zip(labels) {
        let e = counts.entry(l.as_ref()).or_default();
        e.1 += 1;
        e.0 += usize::from(p.as_ref() == l.as_ref());
    }
    Ok(vocabulary
        .iter()
        .filter_map(|w| {
            counts.get(w.as_ref()).map(|&(correct, total)| WordAccuracy {
                word: w.as_ref().to_string(),
                correct,
                total,
                accuracy: correct as f64 / total as f64,
            })
        })
        .collect())
}

/// Orders a per-word table from least to most accurate, then by word.
pub fn hardest_first(table: &mut [WordAccuracy]) {
    table.sort_by(|a, b| a.accuracy.total_cmp(&b.accuracy).then_with(|| a.word.cmp(&b.word)));
}
