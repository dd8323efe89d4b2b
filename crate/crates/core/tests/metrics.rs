use headbench::embed::{
    arcsim, read_feature_csv, video_arcsim, write_feature_csv, FeatureRecord, FeatureVector,
    Modality, StubProvider,
};
use headbench::frame::Frame;
use headbench::semmet::{bsd, esd, l2_distance, lrsd, topk_accuracy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vectors(n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = rng.random_range(1..64);
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            FeatureVector::new(v).unwrap()
        })
        .filter(|v| v.norm() > 0.0)
        .collect()
}

#[test]
fn identities_over_a_thousand_vectors() {
    let vs = random_vectors(1000, 11);
    assert_eq!(vs.len(), 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for a in &vs {
        assert_eq!(lrsd(a, a).unwrap(), 0.0);
        assert_eq!(l2_distance(a, a).unwrap(), 0.0);
        assert_eq!(esd(a, a).unwrap(), 1.0);
        assert_eq!(bsd(a, a).unwrap(), 1.0);
        assert_eq!(arcsim(a, a).unwrap(), 1.0);

        let b: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b = FeatureVector::new(b).unwrap();
        let k = rng.random_range(1e-3..1e3);
        let scaled = a.scaled(k).unwrap();
        let base = bsd(a, &b).unwrap();
        assert!((bsd(&scaled, &b).unwrap() - base).abs() <= 1e-12);
        assert!((esd(&b, &scaled).unwrap() - base).abs() <= 1e-12);
        assert!((-1.0..=1.0).contains(&base));
        assert_eq!(base, bsd(&b, a).unwrap());

        let d2 = lrsd(a, &b).unwrap();
        let d = l2_distance(a, &b).unwrap();
        assert!(d2 >= 0.0);
        assert!((d * d - d2).abs() <= 1e-9 * d2.max(1.0));
        let naive: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((d2 - naive).abs() <= 1e-9 * naive.max(1.0));
    }
}

#[test]
fn opposite_and_orthogonal() {
    let a = FeatureVector::new(vec![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(esd(&a, &a.scaled(-2.0).unwrap()).unwrap(), -1.0);
    let b = FeatureVector::new(vec![3.0, 0.0, -1.0]).unwrap();
    assert_eq!(esd(&a, &b).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn l2_triangle_inequality(
        v in (1usize..16).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), 3)),
    ) {
        let f: Vec<FeatureVector> = v.into_iter().map(|x| FeatureVector::new(x).unwrap()).collect();
        let ab = l2_distance(&f[0], &f[1]).unwrap();
        let bc = l2_distance(&f[1], &f[2]).unwrap();
        let ac = l2_distance(&f[0], &f[2]).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn topk_matches_sorting(
        rows in prop::collection::vec(prop::collection::vec(-3i32..3, 6), 1..20),
        labels_seed in any::<u64>(),
        k in 1usize..6,
    ) {
        let logits: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(labels_seed);
        let labels: Vec<usize> = logits.iter().map(|_| rng.random_range(0..6)).collect();
        let mut hits = 0;
        for (row, &y) in logits.iter().zip(&labels) {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&i, &j| row[j].total_cmp(&row[i]).then(i.cmp(&j)));
            hits += usize::from(order[..k].contains(&y));
        }
        let got = topk_accuracy(&logits, &labels, k).unwrap();
        prop_assert_eq!(got, hits as f64 / labels.len() as f64);
    }
}

fn frame(seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Frame::from_fn(24, 20, 3, |_, _, _| rng.random_range(0.0..1.0))
}

#[test]
fn video_arcsim_ignores_frame_order() {
    let provider = StubProvider::new("id", Modality::FaceIdentity, 12).unwrap();
    let real: Vec<Frame> = (0..9).map(frame).collect();
    let fake: Vec<Frame> = (100..109).map(frame).collect();
    let base = video_arcsim(&real, &fake, &provider).unwrap();
    let order = [4, 0, 8, 2, 7, 1, 6, 3, 5];
    let r2: Vec<Frame> = order.iter().map(|&i| real[i].clone()).collect();
    let f2: Vec<Frame> = order.iter().map(|&i| fake[i].clone()).collect();
    let perm = video_arcsim(&r2, &f2, &provider).unwrap();
    assert!((perm.mean - base.mean).abs() <= 1e-15);
    assert_eq!(video_arcsim(&real, &real, &provider).unwrap().mean, 1.0);
    assert!(video_arcsim(&real, &fake[..8], &provider).is_err());
}

#[test]
fn feature_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let recs: Vec<FeatureRecord> = random_vectors(20, 3)
        .into_iter()
        .enumerate()
        .map(|(i, f)| FeatureRecord {
            id: format!("clip{i}"),
            label: (i % 2 == 0).then(|| "yes".to_string()),
            feature: FeatureVector::new(f.values()[..1].iter().chain(&[0.1, 1e-300, -7.25]).copied().collect()).unwrap(),
        })
        .collect();
    write_feature_csv(&path, &recs).unwrap();
    assert_eq!(read_feature_csv(&path).unwrap(), recs);
}
