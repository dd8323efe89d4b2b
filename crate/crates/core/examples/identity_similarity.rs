//! Frame-wise identity similarity between a real clip and two generated
//! versions, using the analytic stub provider.
//!
//! cargo run --example identity_similarity

use anyhow::Result;
use headbench::embed::{video_arcsim, EmbeddingProvider, Modality, StubProvider};
use headbench::Frame;

fn face(t: usize, tint: f32) -> Frame {
    Frame::from_fn(64, 64, 3, |x, y, c| {
        let d = ((x as f32 - 32.0 - (t % 5) as f32).powi(2) + (y as f32 - 30.0).powi(2)).sqrt();
        let skin = [0.85, 0.65, 0.55][c];
        if d < 22.0 { (skin + tint).clamp(0.0, 1.0) } else { 0.1 + 0.02 * (y / 8) as f32 }
    })
}

fn main() -> Result<()> {
    let provider = StubProvider::new("stub-identity", Modality::FaceIdentity, 16)?;
    let real: Vec<Frame> = (0..10).map(|t| face(t, 0.0)).collect();
    let close: Vec<Frame> = (0..10).map(|t| face(t, 0.03)).collect();
    let far: Vec<Frame> = (0..10).map(|t| face(t + 2, -0.4)).collect();
    println!("provider {} ({} dims)", provider.name(), provider.dim());
    for (name, fake) in [("close", &close), ("far", &far)] {
        let s = video_arcsim(&real, fake, &provider)?;
        let lo = s.per_frame.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("{name:5}: mean arcsim {:.4}, worst frame {lo:.4}", s.mean);
    }
    Ok(())
}
