//! Runs preprocessing and evaluation over a synthetic dataset with two
//! generation methods.
//!
//! cargo run --release --example bench_pipeline [-- WORK_DIR]

use anyhow::Result;
use headbench::bench::fixture::{write_fixture, FixtureSpec};
use headbench::bench::{run_eval, run_preprocess, BenchConfig, DatasetManifest};

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let work = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bench-example".into()));
    let manifest = DatasetManifest::load(write_fixture(work.join("data"), &FixtureSpec::default())?)?;

    let mut cfg = BenchConfig::default();
    cfg.output_dir = work.join("out");
    cfg.crop.output_size = Some(64);

    let pre = run_preprocess(&manifest, &cfg)?;
    println!("preprocessed {} clips, {} already current", pre.processed(), pre.skipped());
    let report = run_eval(&manifest, &cfg)?;
    for (method, metrics) in &report.aggregates.per_method {
        let line: Vec<String> = metrics
            .iter()
            .map(|(name, s)| format!("{name} {:.3}", s.mean.0))
            .collect();
        println!("{method}: {}", line.join(", "));
    }
    for (method, set) in &report.set_metrics {
        for (name, v) in set {
            println!("{method}: {name} {:.3e}", v.0);
        }
    }
    println!("{} failures; reports in {}", report.failures.len(), cfg.output_dir.join("reports").display());
    Ok(())
}
