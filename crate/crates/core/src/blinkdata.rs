//! Blink / non-blink slice dataset built from per-frame eye open rates.
//!
//! Frames are labeled open or closed by thresholding the open rate; a slice
//! of `t` consecutive frames is a blink slice when the label changes inside
//! it.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::geom::EyeLayout;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "lowercase")]
pub enum ThresholdPolicy {
    /// Percentile (0..=100) of the corpus open-rate distribution.
    Percentile(f64),
    Fixed(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Percentile(10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkSliceConfig {
    pub slice_length: usize,
    pub stride: usize,
    pub threshold: ThresholdPolicy,
    /// Margin added around the eye landmarks, as a fraction of the box side.
    pub eye_margin: f64,
    /// Eye crop size `(width, height)` in pixels.
    pub crop_size: (usize, usize),
}

impl Default for BlinkSliceConfig {
    fn default() -> Self {
        BlinkSliceConfig {
            slice_length: 12,
            stride: 6,
            threshold: ThresholdPolicy::default(),
            eye_margin: 0.2,
            crop_size: (64, 32),
        }
    }
}

impl BlinkSliceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slice_length < 2 {
            return Err(Error::invalid(format!("slice length must be >= 2, got {}", self.slice_length)));
        }
        if self.stride < 1 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        if let ThresholdPolicy::Percentile(p) = self.threshold {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::invalid(format!("percentile {p} outside [0, 100]")));
            }
        }
        if !(self.eye_margin >= 0.0) || self.crop_size.0 == 0 || self.crop_size.1 == 0 {
            return Err(Error::invalid("eye margin must be non-negative and crops non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeState {
    Open,
    Closed,
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty set"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::invalid("no open rates"));
    }
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::invalid(format!("open rate {r} is not a finite non-negative number")));
    }
    Ok(())
}

/// Threshold under `policy`. Percentiles are taken over `corpus`.
pub fn resolve_threshold(policy: ThresholdPolicy, corpus: &[f64]) -> Result<f64> {
    match policy {
        ThresholdPolicy::Fixed(t) => Ok(t),
        ThresholdPolicy::Percentile(p) => {
            check_rates(corpus)?;
            percentile(corpus, p)
        }
    }
}

/// Closed where the rate is below the threshold. A percentile policy is
/// evaluated over `corpus`, or over `rates` when no corpus is given.
pub fn label_frames(rates: &[f64], policy: ThresholdPolicy, corpus: Option<&[f64]>) -> Result<Vec<EyeState>> {
    check_rates(rates)?;
    let threshold = resolve_threshold(policy, corpus.unwrap_or(rates))?;
    Ok(rates
        .iter()
        .map(|&r| if r < threshold { EyeState::Closed } else { EyeState::Open })
        .collect())
}

/// One slice of the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlinkSlice {
    pub video_id: String,
    pub start: usize,
    pub length: usize,
    /// 1 for blink, 0 for non-blink.
    pub label: u8,
}

impl BlinkSlice {
    pub fn is_blink(&self) -> bool {
        self.label == 1
    }

    /// The slice's frames out of the full per-frame sequence.
    pub fn frames<'a, T>(&self, all: &'a [T]) -> Result<&'a [T]> {
        all.get(self.start..self.start + self.length).ok_or_else(|| {
            Error::invalid(format!(
                "slice {}+{} of {} exceeds {} frames",
                self.start,
                self.length,
                self.video_id,
                all.len()
            ))
        })
    }
}

/// Number of windows of length `t` at `stride` in `len` frames.
pub fn slice_count(len: usize, t: usize, stride: usize) -> usize {
    if len < t || stride == 0 {
        0
    } else {
        (len - t) / stride + 1
    }
}

/// Sliding windows over the frame labels.
pub fn sample_slices(video_id: &str, labels: &[EyeState], cfg: &BlinkSliceConfig) -> Result<Vec<BlinkSlice>> {
    cfg.validate()?;
    let t = cfg.slice_length;
    if labels.len() < t {
        warn!("{video_id}: {} frames is shorter than one {t}-frame slice", labels.len());
        return Ok(Vec::new());
    }
    Ok((0..slice_count(labels.len(), t, cfg.stride))
        .map(|i| {
            let start = i * cfg.stride;
            let window = &labels[start..start + t];
            let change = window.windows(2).any(|w| w[0] != w[1]);
            BlinkSlice {
                video_id: video_id.to_string(),
                start,
                length: t,
                label: u8::from(change),
            }
        })
        .collect())
}

/// Keeps every slice of the rarer class and an equal-size seeded sample
/// of the other, in the original order.
pub fn balance(slices: &[BlinkSlice], seed: u64) -> Vec<BlinkSlice> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..slices.len()).partition(|&i| slices[i].is_blink());
    let (mut keep, mut major) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    major.shuffle(&mut rng);
    keep.extend(major.into_iter().take(keep.len()));
    keep.sort_unstable();
    keep.into_iter().map(|i| slices[i].clone()).collect()
}

/// Box `(x, y, width, height)` around both eyes, widened by `margin` times
/// its size on every side.
pub fn eye_box(lms: &[[f64; 3]], layout: &EyeLayout, margin: f64) -> Result<(f64, f64, f64, f64)> {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in layout.indices() {
        let p = lms
            .get(i)
            .ok_or_else(|| Error::invalid(format!("eye landmark {i} missing")))?;
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (w, h) = (x1 - x0, y1 - y0);
    if !(w > 0.0 && h >= 0.0) {
        return Err(Error::DegenerateGeometry("eye landmarks span no area".into()));
    }
    // lids nearly shut give a flat box; keep the crop at least half as tall as wide
    let h = h.max(w / 2.0);
    let cy = (y0 + y1) / 2.0;
    Ok((x0 - margin * w, cy - h / 2.0 - margin * h, w * (1.0 + 2.0 * margin), h * (1.0 + 2.0 * margin)))
}

/// Eye-region crop of every frame, resized to `cfg.crop_size`.
pub fn eye_crops(
    frames: &[Frame],
    landmarks: &[Vec<[f64; 3]>],
    layout: &EyeLayout,
    cfg: &BlinkSliceConfig,
) -> Result<Vec<Frame>> {
    if frames.len() != landmarks.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} landmark frames",
            frames.len(),
            landmarks.len()
        )));
    }
    frames
        .iter()
        .zip(landmarks)
        .map(|(f, lm)| {
            let (x, y, w, h) = eye_box(lm, layout, cfg.eye_margin)?;
            let crop = f.crop_padded(
                x.round() as i64,
                y.round() as i64,
                (w.round() as usize).max(1),
                (h.round() as usize).max(1),
            );
            Ok(crop.resize(cfg.crop_size.0, cfg.crop_size.1))
        })
        .collect()
}

/// One JSON object per line.
pub fn write_slice_manifest(path: impl AsRef<Path>, slices: &[BlinkSlice]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for s in slices {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_slice_manifest(path: impl AsRef<Path>) -> Result<Vec<BlinkSlice>> {
    let file = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EyeState::{Closed as C, Open as O};

    #[test]
    fn fixed_threshold() {
        let l = label_frames(&[0.3, 0.3, 0.02, 0.3], ThresholdPolicy::Fixed(0.1), None).unwrap();
        assert_eq!(l, [O, O, C, O]);
        let all = label_frames(&[0.2, 0.4], ThresholdPolicy::Fixed(0.1), None).unwrap();
        assert_eq!(all, [O, O]);
        assert!(label_frames(&[], ThresholdPolicy::Fixed(0.1), None).is_err());
        assert!(label_frames(&[-0.1], ThresholdPolicy::Fixed(0.1), None).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 5.0);
        assert_eq!(percentile(&v, 10.0).unwrap(), 1.4);
        assert_eq!(percentile(&v, 50.0).unwrap(), 3.0);
    }

    #[test]
    fn slices() {
        let cfg = BlinkSliceConfig {
            slice_length: 5,
            stride: 1,
            ..Default::default()
        };
        let s = sample_slices("v", &[O, O, C, O, O], &cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, 1);
        let s = sample_slices("v", &[O; 9], &cfg).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|x| x.label == 0));
        assert!(sample_slices("v", &[O; 4], &cfg).unwrap().is_empty());
    }

    #[test]
    fn balancing_is_even_and_ordered() {
        let cfg = BlinkSliceConfig {
            slice_length: 3,
            stride: 1,
            ..Default::default()
        };
        let mut labels = vec![O; 40];
        labels[20] = C;
        let s = sample_slices("v", &labels, &cfg).unwrap();
        let b = balance(&s, 1);
        let pos = b.iter().filter(|x| x.is_blink()).count();
        assert_eq!(pos, 3);
        assert_eq!(b.len(), 6);
        assert!(b.windows(2).all(|w| w[0].start < w[1].start));
        assert_eq!(b, balance(&s, 1));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("slices.jsonl");
        let s = vec![
            BlinkSlice { video_id: "a".into(), start: 0, length: 12, label: 1 },
            BlinkSlice { video_id: "b".into(), start: 6, length: 12, label: 0 },
        ];
        write_slice_manifest(&p, &s).unwrap();
        assert_eq!(read_slice_manifest(&p).unwrap(), s);
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"video_id":"a","start":0,"length":12,"label":1}"#);
    }

    #[test]
    fn eye_box_margin() {
        let mut lms = vec![[0.0; 3]; 68];
        for (k, i) in (36..48).enumerate() {
            lms[i] = [100.0 + 5.0 * k as f64, 50.0 + (k % 2) as f64 * 20.0, 0.0];
        }
        let (x, y, w, h) = eye_box(&lms, &EyeLayout::default(), 0.2).unwrap();
        assert!((x - (100.0 - 11.0)).abs() < 1e-12);
        assert!((w - 55.0 * 1.4).abs() < 1e-12);
        assert!((h - 27.5 * 1.4).abs() < 1e-12);
        assert!((y + h / 2.0 - 60.0).abs() < 1e-12);
    }
}
