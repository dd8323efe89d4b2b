use std::collections::BTreeMap;

use headbench::geom::PoseTrace;
use headbench::report::{
    aggregate, histogram, pose_confusion_matrix, trend_trace, windowed_fid, BinAxis, BinSpec,
    FailureRecord, Metric, MetricReport, PosePairSample, PoseStats, Provenance, VideoRecord,
};
use proptest::prelude::*;

fn record(i: usize, method: &str, yaw: f64, motion: f64, reference: f64, values: &[(&str, f64)]) -> VideoRecord {
    VideoRecord {
        video_id: format!("v{i:03}"),
        real_id: format!("r{i:03}"),
        method: method.to_string(),
        label: None,
        metrics: values.iter().map(|(k, v)| (k.to_string(), Metric(*v))).collect(),
        pose: Some(PoseStats {
            mean_pitch: 0.0,
            mean_yaw: yaw,
            mean_roll: 0.0,
            motion,
        }),
        reference_yaw: Some(reference),
    }
}

fn records() -> impl Strategy<Value = Vec<VideoRecord>> {
    prop::collection::vec(
        (
            prop_oneof![Just("a"), Just("b"), Just("c")],
            -100.0f64..100.0,
            0.0f64..100.0,
            -100.0f64..100.0,
            0.0f64..1.0,
            prop::option::of(-50.0f64..50.0),
        ),
        0..40,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (m, yaw, motion, reference, s, p))| {
                let mut vals = vec![("ssim", s)];
                if let Some(p) = p {
                    vals.push(("psnr", p));
                }
                record(i, m, yaw, motion, reference, &vals)
            })
            .collect()
    })
}

fn bins() -> Vec<BinSpec> {
    vec![BinSpec::default_yaw(), BinSpec::default_motion()]
}

fn build(records: Vec<VideoRecord>, failures: Vec<FailureRecord>) -> MetricReport {
    aggregate(records, failures, bins(), BTreeMap::new(), Provenance::default()).unwrap()
}

proptest! {
    #[test]
    fn aggregates_ignore_record_order(recs in records(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let fails = vec![
            FailureRecord { id: "x".into(), stage: "eval".into(), error: "e".into() },
            FailureRecord { id: "a".into(), stage: "preprocess".into(), error: "e".into() },
        ];
        let mut rev = fails.clone();
        rev.reverse();
        let a = build(recs, fails);
        let b = build(shuffled, rev);
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        a.verify().unwrap();
    }

    #[test]
    fn per_method_and_per_bin_match_group_by(recs in records()) {
        let report = build(recs.clone(), Vec::new());
        let yaw = BinSpec::default_yaw();
        let mut by_method: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut by_bin: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
        for r in &recs {
            let s = r.metric("ssim").unwrap();
            by_method.entry(&r.method).or_default().push(s);
            by_bin.entry((&r.method, yaw.bin_of(r.pose.unwrap().mean_yaw).unwrap())).or_default().push(s);
        }
        for (m, vals) in &by_method {
            let got = &report.aggregates.per_method[*m]["ssim"];
            let want = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert_eq!(got.count, vals.len());
            prop_assert!((got.mean.0 - want).abs() < 1e-12);
        }
        for (m, stats) in &report.aggregates.per_bin {
            for s in &stats["pose-yaw"]["ssim"] {
                let vals = &by_bin[&(m.as_str(), s.bin)];
                prop_assert_eq!(s.count, vals.len());
                prop_assert!((s.mean.0 - vals.iter().sum::<f64>() / vals.len() as f64).abs() < 1e-12);
            }
            let populated = by_bin.keys().filter(|(mm, _)| mm == m).count();
            prop_assert_eq!(stats["pose-yaw"]["ssim"].len(), populated);
        }
    }

    #[test]
    fn histogram_ratios_sum_to_one(values in prop::collection::vec(-200.0f64..200.0, 1..200)) {
        let spec = BinSpec::default_yaw();
        let h = histogram(&values, &spec).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<usize>(), values.len());
        prop_assert!((h.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.labels.len(), spec.len());
    }

    #[test]
    fn constant_metric_gives_constant_matrix(
        pairs in prop::collection::vec((-90.0f64..90.0, -90.0f64..90.0), 1..80),
        c in -5.0f64..5.0,
    ) {
        let samples: Vec<PosePairSample> = pairs
            .iter()
            .map(|&(reference, target)| PosePairSample { reference, target, value: c })
            .collect();
        let m = pose_confusion_matrix(&samples, &BinSpec::default_yaw()).unwrap();
        let mut total = 0;
        for cell in m.cells.iter().flatten().flatten() {
            prop_assert!((cell.mean.0 - c).abs() <= 1e-12 * c.abs().max(1.0));
            total += cell.count;
        }
        prop_assert_eq!(total, samples.len());
    }
}

#[test]
fn empty_bins_are_absent_and_end_bins_are_open() {
    let spec = BinSpec::new(BinAxis::PoseYaw, vec![-10.0, 0.0, 10.0, 20.0]).unwrap();
    let recs = vec![
        record(0, "a", -500.0, 0.0, 0.0, &[("m", 1.0)]),
        record(1, "a", 500.0, 0.0, 0.0, &[("m", 3.0)]),
        record(2, "a", 600.0, 0.0, 0.0, &[("m", 5.0)]),
    ];
    let curve = headbench::report::metric_vs_bin(&recs, "m", &spec);
    let got: Vec<(String, f64, usize)> = curve.iter().map(|s| (s.label.clone(), s.mean.0, s.count)).collect();
    assert_eq!(got, vec![("<0".to_string(), 1.0, 1), (">=10".to_string(), 4.0, 2)]);
}

#[test]
fn non_finite_metrics_survive_json() {
    let recs = vec![
        record(0, "a", 0.0, 1.0, 0.0, &[("psnr", f64::INFINITY), ("x", f64::NAN)]),
        record(1, "a", 0.0, 1.0, 0.0, &[("psnr", 30.0), ("x", f64::NEG_INFINITY)]),
    ];
    let r = build(recs, Vec::new());
    let text = r.to_json().unwrap();
    assert!(text.contains("\"inf\"") && text.contains("\"nan\"") && text.contains("\"-inf\""));
    let back = MetricReport::from_json(&text).unwrap();
    assert_eq!(back.aggregates.per_method["a"]["psnr"].mean.0, f64::INFINITY);
    assert!(back.records[0].metric("x").unwrap().is_nan());
    assert_eq!(back.to_json().unwrap(), text);
}

#[test]
fn tampered_report_fails_verification() {
    let recs = vec![record(0, "a", 0.0, 1.0, 0.0, &[("m", 0.5)])];
    let mut r = build(recs, Vec::new());
    r.verify().unwrap();
    r.records[0].metrics.insert("m".into(), Metric(0.7));
    assert!(r.verify().is_err());
}

#[test]
fn trend_trace_rows() {
    let pose = PoseTrace::from_angles(vec![[0.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 3.0, 0.0]]);
    let series: BTreeMap<String, Vec<f64>> = [("ssim".to_string(), vec![0.9, 0.8, 0.7])].into();
    let t = trend_trace("v", &pose, series).unwrap();
    assert_eq!(t.len(), 3);
    let tsv = t.to_tsv();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.lines().next().unwrap().contains("ssim"));
    let short: BTreeMap<String, Vec<f64>> = [("ssim".to_string(), vec![0.9])].into();
    assert!(trend_trace("v", &pose, short).is_err());
}

#[test]
fn windowed_fid_is_zero_on_identical_series() {
    let feats: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 % 7.0]).collect();
    let d = windowed_fid(&feats, &feats, 2).unwrap();
    assert_eq!(d.len(), 10);
    assert!(d.iter().all(|v| v.abs() < 1e-6));
    let shifted: Vec<Vec<f64>> = feats.iter().map(|f| vec![f[0] + 2.0, f[1]]).collect();
    let d = windowed_fid(&feats, &shifted, 2).unwrap();
    assert!(d.iter().all(|v| (v - 4.0).abs() < 1e-6));
}
