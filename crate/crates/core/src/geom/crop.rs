use serde::{Deserialize, Serialize};

use super::landmarks::LandmarkSequence;
use super::smoothing::{smooth_sequence, SmoothingConfig};
use crate::frame::{ClipTensor, Frame};
use crate::{Error, Result};

/// Smallest mean face length (pixels) accepted for cropping.
const MIN_FACE_LENGTH: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    /// Horizontal offset of the crop corner from the eye centre, in face lengths.
    pub r1: f64,
    /// Vertical offset of the crop corner from the eye centre, in face lengths.
    pub r2: f64,
    /// Side of the square crop, in face lengths.
    pub side_factor: f64,
    /// Landmark indices averaged into the per-frame eye centre.
    pub eye_region: Vec<usize>,
    /// Resample every crop to this side length; `None` keeps the native side.
    pub output_size: Option<usize>,
}

fn default_eye_region() -> Vec<usize> {
    (36..48).collect()
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            r1: 10.0 / 9.0,
            r2: 8.0 / 9.0,
            side_factor: 41.0 / 18.0,
            eye_region: default_eye_region(),
            output_size: Some(128),
        }
    }
}

impl CropConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("side_factor", self.side_factor)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.eye_region.is_empty() || self.eye_region.iter().any(|&i| i >= 68) {
            return Err(Error::invalid("eye region must list landmark indices below 68"));
        }
        if self.output_size == Some(0) {
            return Err(Error::invalid("output size must be positive"));
        }
        Ok(())
    }
}

/// Square crop window `(x, y, side)` in integer pixels; may extend past the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: i64,
    pub y: i64,
    pub side: i64,
}

impl CropRect {
    /// Intersection with a `width x height` frame as `(x0, y0, x1, y1)`,
    /// half-open; `None` when the window misses the frame entirely.
    pub fn clip_to(&self, width: usize, height: usize) -> Option<(i64, i64, i64, i64)> {
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = (self.x + self.side).min(width as i64);
        let y1 = (self.y + self.side).min(height as i64);
        (x0 < x1 && y0 < y1).then_some((x0, y0, x1, y1))
    }
}

/// The geometric half of tracking: everything except touching pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CropPlan {
    /// Mean over frames of the larger landmark bounding-box side.
    pub face_length: f64,
    pub raw_centers: Vec<[f64; 2]>,
    pub smoothed_centers: Vec<[f64; 2]>,
    /// Real-valued top-left corners before rounding.
    pub corners: Vec<[f64; 2]>,
    pub side: f64,
    pub rects: Vec<CropRect>,
}

impl CropPlan {
    /// Centres of the (real-valued) crop squares.
    pub fn crop_centers(&self) -> Vec<[f64; 2]> {
        self.corners
            .iter()
            .map(|c| [c[0] + self.side / 2.0, c[1] + self.side / 2.0])
            .collect()
    }
}

pub fn plan_crops(
    lms: &LandmarkSequence,
    cfg: &CropConfig,
    smoothing: &SmoothingConfig,
) -> Result<CropPlan> {
    cfg.validate()?;
    let mut xs = Vec::with_capacity(lms.len());
    let mut ys = Vec::with_capacity(lms.len());
    let mut length_sum = 0.0;
    for frame in lms.frames() {
        let n = cfg.eye_region.len() as f64;
        xs.push(cfg.eye_region.iter().map(|&i| frame[i][0]).sum::<f64>() / n);
        ys.push(cfg.eye_region.iter().map(|&i| frame[i][1]).sum::<f64>() / n);

        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in frame {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        length_sum += (x1 - x0).max(y1 - y0);
    }
    let face_length = length_sum / lms.len() as f64;
    if face_length < MIN_FACE_LENGTH {
        return Err(Error::DegenerateFace(format!(
            "mean face length {face_length:.2} px is below {MIN_FACE_LENGTH} px"
        )));
    }

    let sx = smooth_sequence(&xs, smoothing)?;
    let sy = smooth_sequence(&ys, smoothing)?;
    let side = cfg.side_factor * face_length;
    let corners: Vec<[f64; 2]> = sx
        .iter()
        .zip(&sy)
        .map(|(&x, &y)| [x - cfg.r1 * face_length, y - cfg.r2 * face_length])
        .collect();
    let rects = corners
        .iter()
        .map(|c| CropRect {
            x: c[0].round() as i64,
            y: c[1].round() as i64,
            side: side.round() as i64,
        })
        .collect();
    Ok(CropPlan {
        face_length,
        raw_centers: xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect(),
        smoothed_centers: sx.into_iter().zip(sy).map(|(x, y)| [x, y]).collect(),
        corners,
        side,
        rects,
    })
}

#[derive(Debug, Clone)]
pub struct CroppedClip {
    pub clip: ClipTensor,
    pub plan: CropPlan,
    /// Per-frame crop windows intersected with the frame, `(x0, y0, x1, y1)`.
    pub clipped: Vec<(i64, i64, i64, i64)>,
}

/// Tracks the face through `frames` and cuts one square crop per frame.
///
/// Pixels of a crop window that fall outside the frame are zero-filled so that
/// every crop has the same side.
pub fn track_and_crop(
    id: &str,
    frames: &[Frame],
    lms: &LandmarkSequence,
    cfg: &CropConfig,
    smoothing: &SmoothingConfig,
) -> Result<CroppedClip> {
    if frames.len() != lms.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} landmark records",
            frames.len(),
            lms.len()
        )));
    }
    let plan = plan_crops(lms, cfg, smoothing)?;
    let mut crops = Vec::with_capacity(frames.len());
    let mut clipped = Vec::with_capacity(frames.len());
    for (t, (frame, rect)) in frames.iter().zip(&plan.rects).enumerate() {
        let window = rect
            .clip_to(frame.width(), frame.height())
            .ok_or(Error::OutOfFrame { frame: t })?;
        clipped.push(window);
        let side = rect.side.max(1) as usize;
        let crop = frame.crop_padded(rect.x, rect.y, side, side);
        crops.push(match cfg.output_size {
            Some(s) => crop.resize(s, s),
            None => crop,
        });
    }
    Ok(CroppedClip {
        clip: ClipTensor::new(id, crops, lms.frame_rate())?,
        plan,
        clipped,
    })
}
