use std::fs;
use std::path::Path;

use headbench::bench::fixture::{corrupt_entry, write_fixture, FixtureMethod, FixtureSpec};
use headbench::bench::{
    load_frames, run_eval, run_features, run_preprocess, run_report, run_train, BenchConfig,
    DatasetManifest, FeatureSource, NetSize, Target,
};
use headbench::geom::BoundaryPolicy;
use headbench::stnet::Head;
use headbench::Error;

fn config(out: &Path) -> BenchConfig {
    let mut cfg = BenchConfig::default();
    cfg.output_dir = out.to_path_buf();
    cfg.crop.output_size = Some(64);
    cfg.workers = 2;
    cfg
}

fn small_nets(cfg: &mut BenchConfig) {
    for t in [Target::Lipreading, Target::Emotion, Target::Blink] {
        let s = cfg.networks.section_mut(t);
        s.size = NetSize::Small;
        s.frames = 12;
        s.epochs = 20;
        s.batch_size = 8;
        s.arc_epochs = 0;
        (s.height, s.width) = if t == Target::Blink { (16, 32) } else { (24, 24) };
    }
    cfg.blink.crop_size = (32, 16);
}

fn fixture(dir: &Path, spec: FixtureSpec) -> DatasetManifest {
    DatasetManifest::load(write_fixture(dir.join("data"), &spec).unwrap()).unwrap()
}

#[test]
fn default_config_matches_published_constants() {
    let text = BenchConfig::default().to_toml().unwrap();
    let cfg = BenchConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.smoothing.window_size, 11);
    assert_eq!(cfg.smoothing.boundary_policy, BoundaryPolicy::Reflect);
    assert_eq!(cfg.crop.r1, 10.0 / 9.0);
    assert_eq!(cfg.crop.r2, 8.0 / 9.0);
    assert_eq!(cfg.crop.side_factor, 41.0 / 18.0);
    assert_eq!(cfg.lexicon_size, 300);
    assert_eq!(cfg.networks.lipreading.frames, 29);
    assert_eq!(cfg.networks.lipreading.stnet_config(300).num_classes, 300);
    assert_eq!(cfg.networks.emotion.head, Head::Softmax);
    assert!(cfg.networks.emotion.arc_epochs > 0 && cfg.networks.blink.arc_epochs > 0);
    assert_eq!(cfg.blink.slice_length, 12);
}

#[test]
fn empty_manifest_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir.path().join("out"));
    let m = DatasetManifest::default();
    let s = run_preprocess(&m, &cfg).unwrap();
    assert!(s.entries.is_empty());
    let r = run_eval(&m, &cfg).unwrap();
    assert!(r.records.is_empty() && r.failures.is_empty());
    assert_eq!(fs::read_dir(cfg.output_dir.join("crops")).unwrap().count(), 0);
}

#[test]
fn rerun_skips_unchanged_entries_and_redoes_touched_ones() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), FixtureSpec { reals: 2, ..Default::default() });
    let cfg = config(&dir.path().join("out"));
    let first = run_preprocess(&m, &cfg).unwrap();
    assert_eq!(first.processed(), 6);
    let second = run_preprocess(&m, &cfg).unwrap();
    assert_eq!((second.processed(), second.skipped()), (0, 6));

    let lm = &m.get("real000").unwrap().landmarks;
    let mut text = fs::read_to_string(lm).unwrap();
    text.push('\n');
    fs::write(lm, text).unwrap();
    let touched = run_preprocess(&m, &cfg).unwrap();
    assert_eq!((touched.processed(), touched.skipped()), (1, 5));

    let mut moved = cfg.clone();
    moved.crop.output_size = Some(72);
    let third = run_preprocess(&m, &moved).unwrap();
    assert_eq!(third.processed(), 6, "settings change invalidates every entry");
}

#[test]
fn one_corrupted_entry_among_ten() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        reals: 5,
        methods: vec![("copy".into(), FixtureMethod::Copy)],
        ..Default::default()
    };
    let m = fixture(dir.path(), spec);
    assert_eq!(m.entries.len(), 10);
    corrupt_entry(&m, "copy-real003").unwrap();
    let cfg = config(&dir.path().join("out"));
    let s = run_preprocess(&m, &cfg).unwrap();
    assert_eq!(s.processed(), 9);
    assert_eq!(s.failures().len(), 1);
    assert_eq!(s.failures()[0].id, "copy-real003");

    let r = run_eval(&m, &cfg).unwrap();
    assert_eq!(r.records.len(), 4);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].id, "copy-real003");
}

#[test]
fn flat_fixture_has_closed_form_scores() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        reals: 2,
        frames: 6,
        flat_real: Some([200, 100, 50]),
        blink_every: None,
        methods: vec![
            ("copy".into(), FixtureMethod::Copy),
            ("grey".into(), FixtureMethod::Flat([100, 100, 100])),
        ],
        ..Default::default()
    };
    let m = fixture(dir.path(), spec);
    let mut cfg = config(&dir.path().join("out"));
    cfg.metrics.cpbd = false;
    run_preprocess(&m, &cfg).unwrap();
    let r = run_eval(&m, &cfg).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);

    let (a, b) = ([200.0, 100.0, 50.0], [100.0, 100.0, 100.0]);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = dot / (norm(&a) * norm(&b));
    let luma = |v: &[f64; 3]| 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
    let (mx, my) = (luma(&a), luma(&b));
    let c1 = (0.01f64 * 255.0).powi(2);
    let ssim = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
    let psnr = 10.0 * (255.0f64 * 255.0 / ((mx - my) * (mx - my))).log10();

    for rec in &r.records {
        let (arc, s, p) = (
            rec.metric("arcsim").unwrap(),
            rec.metric("ssim").unwrap(),
            rec.metric("psnr").unwrap(),
        );
        if rec.method == "copy" {
            assert_eq!(arc, 1.0);
            assert_eq!(s, 1.0);
            assert_eq!(p, f64::INFINITY);
        } else {
            assert!((arc - cos).abs() < 1e-6, "arcsim {arc} vs {cos}");
            assert!((s - ssim).abs() < 1e-4, "ssim {s} vs {ssim}");
            assert!((p - psnr).abs() < 1e-3, "psnr {p} vs {psnr}");
        }
    }
}

#[test]
fn eval_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), FixtureSpec::default());
    let cfg = config(&dir.path().join("out"));
    run_preprocess(&m, &cfg).unwrap();
    run_eval(&m, &cfg).unwrap();
    let a = fs::read(cfg.output_dir.join("reports/report.json")).unwrap();
    let mut one = cfg.clone();
    one.workers = 1;
    run_eval(&m, &one).unwrap();
    let b = fs::read(cfg.output_dir.join("reports/report.json")).unwrap();
    assert_eq!(a, b);
    assert!(!String::from_utf8(a).unwrap().contains("created_unix"));
}

#[test]
fn semantic_metrics_need_checkpoints_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), FixtureSpec { reals: 1, ..Default::default() });
    let mut cfg = config(&dir.path().join("out"));
    cfg.metrics.esd = true;
    assert!(matches!(run_eval(&m, &cfg), Err(Error::Config(_))));
    cfg.checkpoints.set(Target::Emotion, "missing.hbst".into());
    assert!(matches!(run_eval(&m, &cfg), Err(Error::Config(_))));
    assert!(!cfg.output_dir.join("reports").exists(), "no work before the check");
}

#[test]
fn disabled_metrics_are_absent() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), FixtureSpec { reals: 2, ..Default::default() });
    let mut cfg = config(&dir.path().join("out"));
    cfg.metrics.cpbd = false;
    cfg.metrics.fid = false;
    run_preprocess(&m, &cfg).unwrap();
    let r = run_eval(&m, &cfg).unwrap();
    let names = r.metric_names();
    assert_eq!(names.into_iter().collect::<Vec<_>>(), ["arcsim", "psnr", "ssim"]);
    assert!(r.set_metrics.is_empty());
    let header = fs::read_to_string(cfg.output_dir.join("reports/records.csv")).unwrap();
    assert!(!header.lines().next().unwrap().contains("lrsd"));
}

#[test]
fn gif_sources_are_ingested() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        reals: 2,
        gif_reals: true,
        ..Default::default()
    };
    let m = fixture(dir.path(), spec.clone());
    let src = &m.get("real000").unwrap().source;
    assert_eq!(src.extension().unwrap(), "gif");
    assert_eq!(load_frames(src).unwrap().len(), spec.frames);
    let cfg = config(&dir.path().join("out"));
    let s = run_preprocess(&m, &cfg).unwrap();
    assert!(s.failures().is_empty(), "{:?}", s.failures());
    let r = run_eval(&m, &cfg).unwrap();
    let copy = r.records.iter().find(|r| r.method == "copy").unwrap();
    assert!(copy.metric("ssim").unwrap() > 0.9);
}

#[test]
fn report_reaggregation_reproduces_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), FixtureSpec::default());
    let cfg = config(&dir.path().join("out"));
    run_preprocess(&m, &cfg).unwrap();
    let r = run_eval(&m, &cfg).unwrap();
    r.verify().unwrap();
    let again = run_report(&cfg.output_dir.join("reports/report.json"), &cfg).unwrap();
    assert_eq!(again, r);
}

#[test]
fn training_needs_labels() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), FixtureSpec { reals: 2, ..Default::default() });
    let cfg = config(&dir.path().join("out"));
    run_preprocess(&m, &cfg).unwrap();
    assert!(matches!(run_train(&m, &cfg, Target::Lipreading), Err(Error::Precondition(_))));
    assert!(matches!(run_train(&m, &cfg, Target::Blink), Err(Error::Precondition(_))));
}

#[test]
fn trained_checkpoints_feed_eval_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        reals: 3,
        train_clips: 30,
        val_clips: 9,
        ..Default::default()
    };
    let m = fixture(dir.path(), spec);
    let mut cfg = config(&dir.path().join("out"));
    small_nets(&mut cfg);
    run_preprocess(&m, &cfg).unwrap();

    let lip = run_train(&m, &cfg, Target::Lipreading).unwrap();
    assert!(lip.run.final_val_accuracy.unwrap() > 0.8, "{:?}", lip.run.final_val_accuracy);
    assert_eq!(lip.run.labels.len(), 3);

    cfg.networks.blink.epochs = 2;
    cfg.networks.blink.head = Head::ArcLoss;
    let blink = run_train(&m, &cfg, Target::Blink).unwrap();
    let slices = cfg.output_dir.join("checkpoints/blink_train_slices.jsonl");
    let n = fs::read_to_string(&slices).unwrap().lines().count();
    assert_eq!(blink.train_ids.len(), n);
    assert!(blink.train_ids.iter().all(|id| id.contains('@')));

    cfg.metrics.lrsd = true;
    cfg.metrics.bsd = true;
    cfg.checkpoints.set(Target::Lipreading, "checkpoints/lipreading.hbst".into());
    cfg.checkpoints.set(Target::Blink, "checkpoints/blink.hbst".into());
    let r = run_eval(&m, &cfg).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    assert_eq!(r.provenance.checkpoints["lipreading"], lip.fingerprint);
    for rec in r.records.iter().filter(|r| r.method == "copy") {
        assert_eq!(rec.metric("lrsd"), Some(0.0));
        assert!((rec.metric("bsd").unwrap() - 1.0).abs() < 1e-12);
    }

    let path = run_features(&m, &cfg, &FeatureSource::Network(Target::Lipreading)).unwrap();
    let rows = headbench::embed::read_feature_csv(&path).unwrap();
    assert_eq!(rows.len(), m.entries.len());
    assert!(rows.iter().all(|r| r.feature.dim() == 32));
    let path = run_features(&m, &cfg, &"provider:identity".parse().unwrap()).unwrap();
    assert_eq!(headbench::embed::read_feature_csv(&path).unwrap().len(), m.entries.len() * 12);
}
