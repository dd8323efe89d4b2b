use headbench::embed::{read_feature_csv, write_feature_csv};
use headbench::frame::{ClipTensor, Frame};
use headbench::stnet::toy::moving_pattern_corpus;
use headbench::stnet::{
    arcloss, arcloss_with_grad, build_lexicon, checkpoint, extract_features, train_classifier,
    ArcLossParams, Head, LabeledClip, STNetConfig, TrainRun,
};
use headbench::Error;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

/// Elementwise evaluation of the margin loss with plain loops.
fn naive_arcloss(f: &Array2<f64>, labels: &[usize], w: &Array2<f64>, s: f64, m: f64) -> f64 {
    let (b, d) = f.dim();
    let v = w.ncols();
    let mut total = 0.0;
    for i in 0..b {
        let mut fn2 = 0.0;
        for k in 0..d {
            fn2 += f[[i, k]] * f[[i, k]];
        }
        let mut num = 0.0;
        let mut others = 0.0;
        for j in 0..v {
            let mut wn2 = 0.0;
            let mut dot = 0.0;
            for k in 0..d {
                wn2 += w[[k, j]] * w[[k, j]];
                dot += f[[i, k]] * w[[k, j]];
            }
            let cos = (dot / (fn2.sqrt() * wn2.sqrt())).clamp(-1.0, 1.0);
            if j == labels[i] {
                let theta = (cos.acos() + m).min(std::f64::consts::PI);
                num = (s * theta.cos()).exp();
            } else {
                others += (s * cos).exp();
            }
        }
        total += -(num / (num + others)).ln();
    }
    total / b as f64
}

fn labels(rng: &mut ChaCha8Rng, b: usize, v: usize) -> Vec<usize> {
    (0..b).map(|_| rng.random_range(0..v)).collect()
}

#[test]
fn arcloss_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let f = random(&mut rng, 8, 16);
        let w = random(&mut rng, 16, 5);
        let y = labels(&mut rng, 8, 5);
        // s = 8 keeps the exponentials of the naive oracle finite
        let p = ArcLossParams::new(w.clone(), 8.0, 0.5).unwrap();
        let got = arcloss(&f, &y, &p).unwrap();
        let want = naive_arcloss(&f, &y, &w, 8.0, 0.5);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn arcloss_single_sample_closed_form() {
    // feature on its class column, the other class at a known angle
    let theta1 = 1.1f64;
    let w = Array2::from_shape_vec((2, 2), vec![1.0, theta1.cos(), 0.0, theta1.sin()]).unwrap();
    let f = Array2::from_shape_vec((1, 2), vec![2.5, 0.0]).unwrap();
    let p = ArcLossParams::new(w, 64.0, 0.5).unwrap();
    let got = arcloss(&f, &[0], &p).unwrap();
    let a = 64.0 * 0.5f64.cos();
    let b = 64.0 * theta1.cos();
    // -log(e^a / (e^a + e^b)) evaluated stably
    let want = (1.0 + (b - a).exp()).ln();
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

#[test]
fn arcloss_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let f = random(&mut rng, 4, 6);
        let w = random(&mut rng, 6, 3);
        let y = labels(&mut rng, 4, 3);
        let p = ArcLossParams::new(w.clone(), 4.0, 0.3).unwrap();
        let g = arcloss_with_grad(&f, &y, &p).unwrap();
        let h = 1e-6;
        let mut num = Array2::zeros(f.raw_dim());
        for idx in ndarray::indices(f.dim()) {
            let mut fp = f.clone();
            fp[idx] += h;
            let mut fm = f.clone();
            fm[idx] -= h;
            num[idx] = (arcloss(&fp, &y, &p).unwrap() - arcloss(&fm, &y, &p).unwrap()) / (2.0 * h);
        }
        let rel = (&num - &g.d_features).mapv(f64::abs).sum() / num.mapv(f64::abs).sum();
        assert!(rel <= 1e-4, "feature gradient relative error {rel}");
        let mut num_w = Array2::zeros(w.raw_dim());
        for idx in ndarray::indices(w.dim()) {
            let mut wp = w.clone();
            wp[idx] += h;
            let mut wm = w.clone();
            wm[idx] -= h;
            let lp = arcloss(&f, &y, &ArcLossParams::new(wp, 4.0, 0.3).unwrap()).unwrap();
            let lm = arcloss(&f, &y, &ArcLossParams::new(wm, 4.0, 0.3).unwrap()).unwrap();
            num_w[idx] = (lp - lm) / (2.0 * h);
        }
        let rel = (&num_w - &g.d_w).mapv(f64::abs).sum() / num_w.mapv(f64::abs).sum();
        assert!(rel <= 1e-4, "class gradient relative error {rel}");
    }
}

proptest! {
    #[test]
    fn arcloss_ignores_feature_scale(seed in 0u64..1000, k in 0.01f64..100.0, row in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random(&mut rng, 4, 8);
        let w = random(&mut rng, 8, 3);
        let y = labels(&mut rng, 4, 3);
        let p = ArcLossParams::new(w, 64.0, 0.5).unwrap();
        let mut g = f.clone();
        g.row_mut(row).mapv_inplace(|v| v * k);
        let a = arcloss(&f, &y, &p).unwrap();
        let b = arcloss(&g, &y, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
    }

    #[test]
    fn margin_penalizes_correct_predictions(seed in 0u64..1000, m in 0.05f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random(&mut rng, 5, 3);
        let y = rng.random_range(0..3);
        // a feature close to its own class direction is classified correctly
        let mut f = Array2::zeros((1, 5));
        for k in 0..5 {
            f[[0, k]] = w[[k, y]] + 0.05 * rng.random_range(-1.0..1.0);
        }
        let plain = ArcLossParams::new(w.clone(), 16.0, 0.0).unwrap();
        let cos = plain.cosines(f.row(0)).unwrap();
        prop_assume!((0..3).all(|j| j == y || cos[j] < cos[y]));
        let with = ArcLossParams::new(w, 16.0, m).unwrap();
        prop_assert!(arcloss(&f, &[y], &with).unwrap() > arcloss(&f, &[y], &plain).unwrap());
    }
}

fn small_cfg() -> STNetConfig {
    STNetConfig::small(8, 16, 16, 1, 3)
}

fn names() -> Vec<String> {
    ["r", "l", "d"].iter().map(|s| s.to_string()).collect()
}

#[test]
fn memorizes_a_single_batch() {
    let data = moving_pattern_corpus(8, 8, 16, 99);
    let mut run = TrainRun::new("overfit", names(), Head::Softmax);
    run.epochs = 200;
    run.batch_size = 8;
    let (_, run) = train_classifier(&small_cfg(), &data, &[], &run, None).unwrap();
    assert_eq!(run.log.len(), 200);
    assert_eq!(run.final_train_accuracy, Some(1.0));
}

#[test]
fn training_is_reproducible_and_checkpoints_round_trip() {
    let data = moving_pattern_corpus(24, 8, 16, 5);
    let dir = tempfile::tempdir().unwrap();
    let mut run = TrainRun::new("repro", names(), Head::Softmax);
    run.epochs = 2;
    run.checkpoint_path = Some(dir.path().join("a.ckpt"));
    let (a, run_a) = train_classifier(&small_cfg(), &data[..18], &data[18..], &run, None).unwrap();
    run.checkpoint_path = Some(dir.path().join("b.ckpt"));
    let (b, _) = train_classifier(&small_cfg(), &data[..18], &data[18..], &run, None).unwrap();
    assert_eq!(a, b);

    let ck = checkpoint::load(dir.path().join("a.ckpt")).unwrap();
    assert_eq!(ck.net, a);
    assert_eq!(ck.run.log, run_a.log);
    assert_eq!(ck.labels(), names().as_slice());
    let again = checkpoint::load(dir.path().join("a.ckpt")).unwrap();
    assert_eq!(ck.fingerprint, again.fingerprint);
    assert_eq!(ck.fingerprint.len(), 64);

    let mut bytes = std::fs::read(dir.path().join("a.ckpt")).unwrap();
    bytes.truncate(bytes.len() - 3);
    assert!(matches!(checkpoint::decode(&bytes), Err(Error::Format { .. })));
    assert!(checkpoint::decode(b"not a checkpoint").is_err());
}

#[test]
fn feature_export_round_trips() {
    let data = moving_pattern_corpus(6, 8, 16, 1);
    let net = headbench::stnet::StNet::new(small_cfg(), 4).unwrap();
    let clips: Vec<ClipTensor> = data.iter().map(|c| c.clip.clone()).collect();
    let tags: Vec<String> = data.iter().map(|c| names()[c.label].clone()).collect();
    let recs = extract_features(&net, &clips, Some(&tags)).unwrap();
    assert_eq!(recs.len(), 6);
    assert!(recs.iter().all(|r| r.feature.dim() == 32));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    write_feature_csv(&path, &recs).unwrap();
    assert_eq!(read_feature_csv(&path).unwrap(), recs);
}

#[test]
fn non_finite_loss_is_a_training_fault() {
    let mut data = moving_pattern_corpus(12, 8, 16, 2);
    let bad = Frame::filled(16, 16, 1, f32::NAN);
    data[7].clip.frames[3] = bad;
    let dir = tempfile::tempdir().unwrap();
    let mut run = TrainRun::new("fault", names(), Head::Softmax);
    run.epochs = 3;
    run.batch_size = 12;
    run.checkpoint_path = Some(dir.path().join("x.ckpt"));
    let err = train_classifier(&small_cfg(), &data, &[], &run, None).unwrap_err();
    assert!(matches!(err, Error::TrainingFault { epoch: 0, last_good: None }), "{err}");
}

#[test]
fn preconditions() {
    let data = moving_pattern_corpus(9, 8, 16, 3);
    let run = TrainRun::new("pre", names(), Head::Softmax);
    let one_class: Vec<LabeledClip> = data.iter().filter(|c| c.label == 0).cloned().collect();
    assert!(matches!(
        train_classifier(&small_cfg(), &one_class, &[], &run, None),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        train_classifier(&small_cfg(), &data, &data[..1], &run, None),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn lexicon_of_three_hundred() {
    // word k occurs k + 1 times, so ranking is by descending index
    let mut corpus = Vec::new();
    for k in 0..400 {
        for _ in 0..=k {
            corpus.push(format!("w{k:03}"));
        }
    }
    let lex = build_lexicon(&corpus, 300).unwrap();
    assert_eq!(lex.len(), 300);
    assert_eq!(lex[0], "w399");
    assert_eq!(lex[299], "w100");
}
