//! Semantic distances between network features and per-word accuracy of a
//! classifier's predictions.
//!
//! cargo run --example semantic_scores

use anyhow::Result;
use headbench::embed::FeatureVector;
use headbench::semmet::{bsd_video, esd, hardest_first, lrsd, per_word_accuracy, topk_accuracy};

fn main() -> Result<()> {
    let real = FeatureVector::new(vec![0.8, -0.1, 0.4, 0.2])?;
    let good = FeatureVector::new(vec![0.7, -0.1, 0.5, 0.2])?;
    let bad = FeatureVector::new(vec![-0.2, 0.9, 0.0, -0.3])?;
    for (name, f) in [("good", &good), ("bad", &bad)] {
        println!("{name}: lrsd {:.3}  esd {:.3}", lrsd(&real, f)?, esd(&real, f)?);
    }
    let slices = vec![real.clone(), good.clone()];
    println!("bsd over two slices: {:.3}", bsd_video(&slices, &[good.clone(), bad.clone()])?);

    let logits = vec![
        vec![2.0, 0.1, 0.3],
        vec![0.2, 1.5, 1.6],
        vec![0.1, 0.2, 3.0],
        vec![1.0, 0.9, 0.0],
    ];
    let labels = [0, 1, 2, 1];
    println!("top-1 {:.2}, top-2 {:.2}", topk_accuracy(&logits, &labels, 1)?, topk_accuracy(&logits, &labels, 2)?);

    let vocab = ["about", "after", "again"];
    let predicted = ["about", "again", "again", "about"];
    let truth = ["about", "after", "again", "after"];
    let mut table = per_word_accuracy(&predicted, &truth, &vocab)?;
    hardest_first(&mut table);
    for w in table {
        println!("{:6} {}/{}", w.word, w.correct, w.total);
    }
    Ok(())
}
