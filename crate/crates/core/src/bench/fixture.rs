//! Synthetic talking-head datasets with known answers.
//!
//! Every clip is a bright spot drifting right, left or down over a static
//! crossed colour grating, with two dark eye discs. The head pose drives a
//! 68-point 3D landmark track built from the bundled canonical face, so
//! cropping and pose estimation see realistic input.
//! Generated clips are derived from their real clip by a [`FixtureMethod`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::gif::GifEncoder;
use image::{Delay, RgbaImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::frame::Frame;
use crate::geom::{rotation_from_euler, CanonicalFace, LandmarkSequence};
use crate::stnet::toy::TOY_CLASSES;
use crate::Result;

use super::layout::save_frames;
use super::{DatasetManifest, ManifestEntry, Split};

#[derive(Debug, Clone, PartialEq)]
pub enum FixtureMethod {
    /// Pixel-identical to the real clip.
    Copy,
    /// Real clip plus Gaussian pixel noise of this standard deviation
    /// (on a `[0, 1]` scale) and extra head sway.
    Noise(f64),
    /// Every pixel the given colour.
    Flat([u8; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    /// Real test clips; each method gets one generated clip per real clip.
    pub reals: usize,
    pub frames: usize,
    /// Side of the square source frames.
    pub size: usize,
    pub methods: Vec<(String, FixtureMethod)>,
    /// Extra labeled real clips for training.
    pub train_clips: usize,
    pub val_clips: usize,
    /// Paint every real clip this flat colour instead of a grating.
    pub flat_real: Option<[u8; 3]>,
    /// Frames between blink onsets; `None` never blinks.
    pub blink_every: Option<usize>,
    /// Store real test clips as animated GIFs.
    pub gif_reals: bool,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            reals: 4,
            frames: 12,
            size: 96,
            methods: vec![
                ("copy".into(), FixtureMethod::Copy),
                ("noisy".into(), FixtureMethod::Noise(0.05)),
            ],
            train_clips: 0,
            val_clips: 0,
            flat_real: None,
            blink_every: Some(8),
            gif_reals: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy)]
struct ClipPlan {
    class: usize,
    base_yaw: f64,
    sway: f64,
    phase: f64,
    tint: [f64; 3],
    blink_offset: usize,
}

/// Frames blink for three frames starting every `every` frames.
fn openness(t: usize, every: Option<usize>, offset: usize) -> f64 {
    match every {
        Some(n) if n > 0 && (t + offset) % n < 3 && t + offset >= n => 0.1,
        _ => 1.0,
    }
}

fn landmarks(plan: &ClipPlan, spec: &FixtureSpec, canon: &[[f64; 3]]) -> Vec<Vec<[f64; 3]>> {
    let size = spec.size as f64;
    let scale = 0.25 * size / 140.0;
    (0..spec.frames)
        .map(|t| {
            let swing = (2.0 * PI * t as f64 / spec.frames as f64).sin();
            let yaw = plan.base_yaw + plan.sway * swing;
            let r = rotation_from_euler(3.0 * swing, yaw, 0.0);
            let mut pts: Vec<[f64; 3]> = canon
                .iter()
                .map(|c| {
                    let p = r * nalgebra::Vector3::from(*c) * scale;
                    [p.x + size / 2.0, p.y + size / 2.0, p.z]
                })
                .collect();
            let open = openness(t, spec.blink_every, plan.blink_offset);
            for eye in [36usize, 42] {
                let mid = (pts[eye][1] + pts[eye + 3][1]) / 2.0;
                for k in [1, 2, 4, 5] {
                    pts[eye + k][1] = mid + (pts[eye + k][1] - mid) * open;
                }
            }
            pts
        })
        .collect()
}

fn render(plan: &ClipPlan, spec: &FixtureSpec, lms: &[Vec<[f64; 3]>]) -> Vec<Frame> {
    let size = spec.size;
    let speed = 0.02 * size as f64;
    let (vx, vy) = [(speed, 0.0), (-speed, 0.0), (0.0, speed)][plan.class % 3];
    let travel = speed * (spec.frames as f64 - 1.0);
    let centre = size as f64 / 2.0;
    let blob = [centre - vx.signum() * travel / 2.0, centre - vy.signum() * travel / 2.0];
    let radius = 0.06 * size as f64;
    lms.iter()
        .enumerate()
        .map(|(t, pts)| {
            if let Some(c) = spec.flat_real {
                return Frame::from_fn(size, size, 3, |_, _, ch| c[ch] as f32 / 255.0);
            }
            let eyes: Vec<([f64; 2], f64)> = [36usize, 42]
                .iter()
                .map(|&i| {
                    let cx = (i..i + 6).map(|k| pts[k][0]).sum::<f64>() / 6.0;
                    let cy = (i..i + 6).map(|k| pts[k][1]).sum::<f64>() / 6.0;
                    let gap = ((pts[i + 1][1] - pts[i + 5][1]).abs() + (pts[i + 2][1] - pts[i + 4][1]).abs()) / 2.0;
                    ([cx, cy], gap.max(0.5))
                })
                .collect();
            Frame::from_fn(size, size, 3, |x, y, ch| {
                let (xf, yf) = (x as f64, y as f64);
                let g = (0.3 * xf + 0.08 * yf + plan.phase).sin() + (0.08 * xf + 0.3 * yf - plan.phase).sin();
                let (bx, by) = (xf - blob[0] - vx * t as f64, yf - blob[1] - vy * t as f64);
                let spot = (-(bx * bx + by * by) / (2.0 * radius * radius)).exp();
                let mut v = 0.4 + (0.08 * g + 0.45 * spot) * plan.tint[ch];
                for ([cx, cy], r) in &eyes {
                    if ((xf - cx) / (1.6 * r)).powi(2) + ((yf - cy) / r).powi(2) <= 1.0 {
                        v = 0.08;
                    }
                }
                v as f32
            })
        })
        .collect()
}

fn perturb(frames: &[Frame], method: &FixtureMethod, rng: &mut ChaCha8Rng) -> Vec<Frame> {
    match method {
        FixtureMethod::Copy => frames.to_vec(),
        FixtureMethod::Flat(c) => frames
            .iter()
            .map(|f| Frame::from_fn(f.width(), f.height(), 3, |_, _, ch| c[ch] as f32 / 255.0))
            .collect(),
        FixtureMethod::Noise(sigma) => {
            let noise = Normal::new(0.0, *sigma).expect("finite sigma");
            frames
                .iter()
                .map(|f| {
                    let data = f
                        .data()
                        .iter()
                        .map(|&v| (v as f64 + noise.sample(rng)).clamp(0.0, 1.0) as f32)
                        .collect();
                    Frame::new(f.width(), f.height(), f.channels(), data).expect("sized buffer")
                })
                .collect()
        }
    }
}

fn write_gif(path: &Path, frames: &[Frame]) -> Result<()> {
    let mut enc = GifEncoder::new(fs::File::create(path)?);
    for f in frames {
        let rgba: RgbaImage = f.to_dynamic().to_rgba8();
        enc.encode_frame(image::Frame::from_parts(rgba, 0, 0, Delay::from_numer_denom_ms(40, 1)))?;
    }
    Ok(())
}

/// Writes frames, landmarks and `manifest.json` under `dir` and returns
/// the manifest path.
pub fn write_fixture(dir: impl AsRef<Path>, spec: &FixtureSpec) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("frames"))?;
    fs::create_dir_all(dir.join("landmarks"))?;
    let canon = CanonicalFace::bundled().points();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::new();

    let mut add = |id: String,
                   frames: &[Frame],
                   lms: Vec<Vec<[f64; 3]>>,
                   gif: bool,
                   method: Option<&str>,
                   real: Option<&str>,
                   labels: BTreeMap<String, String>,
                   split: Split|
     -> Result<()> {
        let source = if gif {
            let p = PathBuf::from("frames").join(format!("{id}.gif"));
            write_gif(&dir.join(&p), frames)?;
            p
        } else {
            let p = PathBuf::from("frames").join(&id);
            save_frames(&dir.join(&p), frames)?;
            p
        };
        let lm_path = PathBuf::from("landmarks").join(format!("{id}.csv"));
        LandmarkSequence::new(lms, 3, 25.0)?.write_csv(dir.join(&lm_path))?;
        entries.push(ManifestEntry {
            id,
            source,
            landmarks: lm_path,
            method: method.map(Into::into),
            real_id: real.map(Into::into),
            labels,
            split,
            reference_frame: 0,
        });
        Ok(())
    };

    let groups = [
        (Split::Test, spec.reals, "real"),
        (Split::Train, spec.train_clips, "train"),
        (Split::Val, spec.val_clips, "val"),
    ];
    for (split, n, prefix) in groups {
        for i in 0..n {
            let plan = ClipPlan {
                class: i % 3,
                base_yaw: if n > 1 { -40.0 + 80.0 * i as f64 / (n - 1) as f64 } else { 0.0 },
                sway: 4.0,
                phase: i as f64 * 0.7,
                tint: [1.0, 0.8 + 0.05 * (i % 4) as f64, 0.6],
                blink_offset: (i * 3) % spec.blink_every.unwrap_or(1).max(1),
            };
            let lms = landmarks(&plan, spec, &canon);
            let frames = render(&plan, spec, &lms);
            let class = TOY_CLASSES[plan.class].to_string();
            let labels: BTreeMap<String, String> =
                [("word".to_string(), class.clone()), ("emotion".to_string(), class)].into();
            let id = format!("{prefix}{i:03}");
            let gif = spec.gif_reals && split == Split::Test;
            add(id.clone(), &frames, lms.clone(), gif, None, None, labels.clone(), split)?;
            if split != Split::Test {
                continue;
            }
            for (method, kind) in &spec.methods {
                let fake = perturb(&frames, kind, &mut rng);
                let fake_lms = match kind {
                    FixtureMethod::Noise(_) => {
                        let swayed = ClipPlan { sway: 15.0, ..plan };
                        landmarks(&swayed, spec, &canon)
                    }
                    _ => lms.clone(),
                };
                add(
                    format!("{method}-{id}"),
                    &fake,
                    fake_lms,
                    false,
                    Some(method),
                    Some(&id),
                    labels.clone(),
                    split,
                )?;
            }
        }
    }
    let manifest = DatasetManifest {
        name: "synthetic".into(),
        entries,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Overwrites the first source frame of `id` with bytes no decoder accepts.
pub fn corrupt_entry(manifest: &DatasetManifest, id: &str) -> Result<()> {
    let e = manifest
        .get(id)
        .ok_or_else(|| crate::Error::invalid(format!("no entry `{id}`")))?;
    let target = if e.source.is_dir() {
        super::layout::frame_files(&e.source)?
            .into_iter()
            .next()
            .ok_or_else(|| crate::Error::invalid(format!("`{id}` has no frames")))?
    } else {
        e.source.clone()
    };
    fs::write(target, b"not an image")?;
    Ok(())
}
