//! Trains the spatio-temporal network on the synthetic moving-pattern
//! corpus, then refines its features with the angular margin head.
//!
//! cargo run --release --example toy_training

use anyhow::Result;
use headbench::stnet::toy::{moving_pattern_corpus, TOY_CLASSES};
use headbench::stnet::{
    extract_features, mean_intra_class_cosine, train_classifier, Head, STNetConfig, TrainRun,
};

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let data = moving_pattern_corpus(500, 8, 16, 7);
    let (train, val) = data.split_at(400);
    let cfg = STNetConfig::small(8, 16, 16, 1, 3);
    let labels: Vec<String> = TOY_CLASSES.iter().map(|s| s.to_string()).collect();

    let mut run = TrainRun::new("toy", labels.clone(), Head::Softmax);
    run.epochs = 20;
    let start = std::time::Instant::now();
    let (net, run) = train_classifier(&cfg, train, val, &run, None)?;
    println!(
        "softmax: val accuracy {:.3} after {} epochs ({:.1?})",
        run.final_val_accuracy.unwrap_or(0.0),
        run.log.len(),
        start.elapsed()
    );

    let clips: Vec<_> = val.iter().map(|c| c.clip.clone()).collect();
    let names: Vec<String> = val.iter().map(|c| labels[c.label].clone()).collect();
    let before = mean_intra_class_cosine(&extract_features(&net, &clips, Some(&names))?)?;

    let mut arc = TrainRun::new("toy", labels, Head::ArcLoss);
    arc.epochs = 5;
    arc.optimizer.learning_rate = 3e-4;
    let (refined, arc) = train_classifier(&cfg, train, val, &arc, Some(&net))?;
    let after = mean_intra_class_cosine(&extract_features(&refined, &clips, Some(&names))?)?;
    println!(
        "arcloss: val accuracy {:.3}, intra-class cosine {before:.4} -> {after:.4}",
        arc.final_val_accuracy.unwrap_or(0.0)
    );
    Ok(())
}
