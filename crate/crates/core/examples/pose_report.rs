//! Aggregates per-video scores by head pose and motion and writes the
//! report tables.
//!
//! cargo run --example pose_report [-- OUT_DIR]

use std::collections::BTreeMap;

use anyhow::Result;
use headbench::report::{
    aggregate, BinSpec, FailureRecord, Metric, PoseStats, Provenance, VideoRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "report-example".into());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut records = Vec::new();
    for method in ["method-a", "method-b"] {
        let penalty = if method == "method-a" { 0.004 } else { 0.008 };
        for i in 0..60 {
            let yaw: f64 = rng.random_range(-70.0..70.0);
            let reference: f64 = yaw + rng.random_range(-30.0..30.0);
            let motion: f64 = rng.random_range(0.0..45.0);
            // quality falls off with the pose gap to the reference
            let ssim = 0.95 - penalty * (yaw - reference).abs() + rng.random_range(-0.02..0.02);
            records.push(VideoRecord {
                video_id: format!("{method}-{i:03}"),
                real_id: format!("real{i:03}"),
                method: method.into(),
                label: None,
                metrics: BTreeMap::from([("ssim".to_string(), Metric(ssim))]),
                pose: Some(PoseStats { mean_pitch: 0.0, mean_yaw: yaw, mean_roll: 0.0, motion }),
                reference_yaw: Some(reference),
            });
        }
    }
    let failures = vec![FailureRecord {
        id: "method-b-broken".into(),
        stage: "eval".into(),
        error: "no frames".into(),
    }];
    let bins = vec![BinSpec::default_yaw(), BinSpec::default_motion()];
    let report = aggregate(records, failures, bins, BTreeMap::new(), Provenance::default())?;

    for (method, metrics) in &report.aggregates.per_method {
        let s = &metrics["ssim"];
        println!("{method}: ssim {:.4} over {} clips", s.mean.0, s.count);
        for b in &report.aggregates.per_bin[method]["pose-yaw"]["ssim"] {
            println!("  yaw {:>10}: {:.4} ({})", b.label, b.mean.0, b.count);
        }
    }
    report.write_dir(&out)?;
    println!("tables written to {out}/");
    Ok(())
}
