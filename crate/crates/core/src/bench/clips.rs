//! Turning preprocessed crops and eye regions into network inputs.

use crate::blinkdata::{eye_crops, slice_count, BlinkSliceConfig};
use crate::embed::FeatureVector;
use crate::frame::{ClipTensor, Frame};
use crate::geom::{EyeLayout, LandmarkSequence};
use crate::stnet::{STNetConfig, StNet};
use crate::{Error, Result};

use super::layout::{frame_files, load_frames, OutputLayout};
use super::{BenchConfig, ManifestEntry};

/// Face crops written by preprocessing.
pub fn load_crops(out: &OutputLayout, id: &str) -> Result<Vec<Frame>> {
    let dir = out.crop_dir(id);
    if !dir.is_dir() {
        return Err(Error::InvalidInput(format!(
            "`{id}` has no crops (preprocessing failed or was not run)"
        )));
    }
    let frames = frame_files(&dir)?
        .iter()
        .map(Frame::load)
        .collect::<Result<Vec<_>>>()?;
    if frames.is_empty() {
        return Err(Error::InvalidInput(format!("`{id}` has an empty crop directory")));
    }
    Ok(frames)
}

fn to_channels(f: Frame, channels: usize) -> Frame {
    match (f.channels(), channels) {
        (3, 1) => f.to_grayscale(),
        (1, 3) => {
            let data = f.data().iter().flat_map(|&v| [v, v, v]).collect();
            Frame::new(f.width(), f.height(), 3, data).expect("sized buffer")
        }
        _ => f,
    }
}

/// Resizes and converts frames to the network's input, keeping the first
/// `cfg.frames` frames and repeating the last one when the clip is short.
pub fn fit_clip(id: &str, frames: &[Frame], cfg: &STNetConfig) -> Result<ClipTensor> {
    let last = frames
        .last()
        .ok_or_else(|| Error::InvalidInput(format!("`{id}` has no frames")))?;
    let out: Vec<Frame> = (0..cfg.frames)
        .map(|t| {
            let f = frames.get(t).unwrap_or(last);
            to_channels(f.resize(cfg.width, cfg.height), cfg.channels)
        })
        .collect();
    ClipTensor::new(id, out, 25.0)
}

pub fn clip_feature(net: &StNet, clip: &ClipTensor) -> Result<FeatureVector> {
    let (feature, _) = net.forward(clip)?;
    FeatureVector::from_f32(feature.as_slice().unwrap_or(&feature.to_vec()))
}

/// Eye-region crops of every source frame of an entry.
pub fn entry_eye_crops(entry: &ManifestEntry, cfg: &BenchConfig) -> Result<Vec<Frame>> {
    let frames = load_frames(&entry.source)?;
    let lms = LandmarkSequence::read(&entry.landmarks, cfg.frame_rate)?;
    let points: Vec<Vec<[f64; 3]>> = lms.frames().map(|f| f.to_vec()).collect();
    eye_crops(&frames, &points, &EyeLayout::default(), &cfg.blink)
}

/// Every blink window of an entry as a network input, in start order.
pub fn blink_windows(
    entry: &ManifestEntry,
    cfg: &BenchConfig,
    net: &STNetConfig,
) -> Result<Vec<ClipTensor>> {
    let crops = entry_eye_crops(entry, cfg)?;
    window_clips(&entry.id, &crops, &cfg.blink, net)
}

pub fn window_clips(
    id: &str,
    crops: &[Frame],
    blink: &BlinkSliceConfig,
    net: &STNetConfig,
) -> Result<Vec<ClipTensor>> {
    let t = blink.slice_length;
    (0..slice_count(crops.len(), t, blink.stride))
        .map(|i| {
            let start = i * blink.stride;
            fit_clip(&format!("{id}@{start}"), &crops[start..start + t], net)
        })
        .collect()
}
