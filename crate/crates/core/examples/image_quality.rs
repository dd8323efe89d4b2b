//! Full-reference and no-reference quality of a degraded image, plus the
//! Fréchet distance between two feature sets.
//!
//! cargo run --release --example image_quality [-- IMAGE]

use anyhow::Result;
use headbench::imgq::{cpbd, frechet_distance, gaussian_stats, psnr, ssim, CpbdParams, SsimParams};
use headbench::Plane;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn box_blur(p: &Plane, r: usize) -> Plane {
    Plane::from_fn(p.width, p.height, |x, y| {
        let (x0, x1) = (x.saturating_sub(r), (x + r).min(p.width - 1));
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(p.height - 1));
        let mut s = 0.0;
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                s += p.at(xx, yy);
            }
        }
        s / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64
    })
}

fn main() -> Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/cameraman.png").into());
    let img = Plane::load_luma(&path)?;
    let params = SsimParams::default();
    let cp = CpbdParams::default();
    println!("{path}: {}x{}", img.width, img.height);
    println!("original  cpbd {:.4}", cpbd(&img, 255.0, &cp)?.score);
    for r in [1, 2, 4] {
        let b = box_blur(&img, r);
        println!(
            "blur r={r}  ssim {:.4}  psnr {:6.2} dB  cpbd {:.4}",
            ssim(&img, &b, &params)?,
            psnr(&img, &b, 255.0)?,
            cpbd(&b, 255.0, &cp)?.score
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = Normal::new(0.0, 1.0)?;
    let real: Vec<Vec<f64>> = (0..2000).map(|_| (0..8).map(|_| n.sample(&mut rng)).collect()).collect();
    for shift in [0.0, 0.5, 1.0] {
        let fake: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..8).map(|_| n.sample(&mut rng) + shift).collect())
            .collect();
        let d = frechet_distance(&gaussian_stats(&real)?, &gaussian_stats(&fake)?)?;
        println!("feature shift {shift}: frechet distance {d:.4} (ideal {:.1})", 8.0 * shift * shift);
    }
    Ok(())
}
