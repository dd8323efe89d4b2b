//! Smooths a jittery landmark track and cuts fixed-size face crops from it.
//!
//! cargo run --example smooth_and_crop [-- OUT_DIR]

use anyhow::Result;
use headbench::geom::{
    track_and_crop, BoundaryPolicy, CanonicalFace, CropConfig, LandmarkSequence, SmoothingConfig,
};
use headbench::Frame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn total_variation(path: &[[f64; 2]]) -> f64 {
    path.windows(2)
        .map(|w| (w[1][0] - w[0][0]).abs() + (w[1][1] - w[0][1]).abs())
        .sum()
}

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crops-example".into());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let canon = CanonicalFace::bundled().points();

    // a face drifting right with per-frame detector jitter
    let n = 40;
    let frames_2d: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|t| {
            let (dx, dy) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            canon
                .iter()
                .map(|p| [120.0 + 2.0 * t as f64 + 0.5 * p[0] + dx, 120.0 + 0.5 * p[1] + dy])
                .collect()
        })
        .collect();
    let lms = LandmarkSequence::from_2d(frames_2d, 25.0)?;
    let frames: Vec<Frame> = (0..n)
        .map(|t| {
            Frame::from_fn(320, 240, 3, |x, y, c| {
                let d = ((x as f64 - 120.0 - 2.0 * t as f64).powi(2) + (y as f64 - 120.0).powi(2)).sqrt();
                if d < 60.0 { [0.9, 0.7, 0.6][c] } else { 0.2 }
            })
        })
        .collect();

    let smoothing = SmoothingConfig::new(11, BoundaryPolicy::Reflect)?;
    let crop = CropConfig { output_size: Some(96), ..Default::default() };
    let clip = track_and_crop("drift", &frames, &lms, &crop, &smoothing)?;
    let plan = &clip.plan;
    println!("face length {:.1} px, crop side {:.1} px", plan.face_length, plan.side);
    println!(
        "centre path variation: raw {:.1}, smoothed {:.1}",
        total_variation(&plan.raw_centers),
        total_variation(&plan.smoothed_centers)
    );

    std::fs::create_dir_all(&out)?;
    for (i, f) in clip.clip.frames.iter().enumerate().step_by(10) {
        f.save(format!("{out}/{i:05}.png"))?;
    }
    println!("wrote every tenth crop to {out}/");
    Ok(())
}
