//! Synthetic moving-pattern clips for smoke tests and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::train::LabeledClip;
use crate::frame::{ClipTensor, Frame};

pub const TOY_CLASSES: [&str; 3] = ["rightward", "leftward", "downward"];

/// `n` grayscale clips of a bright blob drifting right, left or down on a
/// noisy background. Start positions overlap across classes, so only the
/// motion separates them. Clip `i` has class `i % 3`.
pub fn moving_pattern_corpus(n: usize, frames: usize, size: usize, seed: u64) -> Vec<LabeledClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 0.05).unwrap();
    let s = size as f32;
    (0..n)
        .map(|i| {
            let label = i % 3;
            let speed = rng.random_range(0.8..1.4) * s / 16.0;
            let travel = speed * (frames as f32 - 1.0);
            let along = rng.random_range(0.15 * s..(0.85 * s - travel).max(0.15 * s + 0.01));
            let across = rng.random_range(0.25 * s..0.75 * s);
            let radius = rng.random_range(1.2..2.2) * s / 16.0;
            let bg = rng.random_range(0.05..0.3);
            let amp = rng.random_range(0.5..0.7);
            let mut out = Vec::with_capacity(frames);
            for t in 0..frames {
                let d = speed * t as f32;
                let (cx, cy) = match label {
                    0 => (along + d, across),
                    1 => (s - along - d, across),
                    _ => (across, along + d),
                };
                let mut pix = Vec::with_capacity(size * size);
                for y in 0..size {
                    for x in 0..size {
                        let r2 = (x as f32 - cx).powi(2) + (y as f32 - cy).powi(2);
                        let v = bg + amp * (-r2 / (2.0 * radius * radius)).exp() + noise.sample(&mut rng);
                        pix.push(v.clamp(0.0, 1.0));
                    }
                }
                out.push(Frame::new(size, size, 1, pix).unwrap());
            }
            LabeledClip {
                clip: ClipTensor::new(format!("toy{i:04}"), out, 25.0).unwrap(),
                label,
            }
        })
        .collect()
}
