//! Builds a balanced blink training set from eye-openness traces.
//!
//! cargo run --example blink_slices

use anyhow::Result;
use headbench::blinkdata::{
    balance, label_frames, percentile, sample_slices, BlinkSliceConfig, EyeState, ThresholdPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // open eyes around 0.3 with a three-frame blink about once a second
    let traces: Vec<Vec<f64>> = (0..6)
        .map(|_| {
            let every = rng.random_range(20..28);
            (0..250)
                .map(|t| {
                    let base = if t % every < 3 { 0.04 } else { 0.3 };
                    base + rng.random_range(-0.02..0.02)
                })
                .collect()
        })
        .collect();
    let corpus: Vec<f64> = traces.iter().flatten().copied().collect();
    let cfg = BlinkSliceConfig::default();
    println!("threshold at the 10th percentile: {:.3}", percentile(&corpus, 10.0)?);

    let mut slices = Vec::new();
    for (i, rates) in traces.iter().enumerate() {
        let states = label_frames(rates, ThresholdPolicy::Percentile(10.0), Some(&corpus))?;
        let closed = states.iter().filter(|s| **s == EyeState::Closed).count();
        let s = sample_slices(&format!("clip{i}"), &states, &cfg)?;
        println!("clip{i}: {closed} closed frames, {} slices", s.len());
        slices.extend(s);
    }
    let kept = balance(&slices, 0);
    let blinks = kept.iter().filter(|s| s.is_blink()).count();
    println!(
        "{} slices of {} frames, balanced to {} blink + {} open",
        slices.len(),
        cfg.slice_length,
        blinks,
        kept.len() - blinks
    );
    Ok(())
}
