//! Image-quality metrics against reference values and naive re-derivations.

use headbench::imgq::{
    cpbd, frechet_distance, gaussian_stats, psnr, ssim, CpbdParams, GaussianStats, SsimParams,
};
use headbench::Plane;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cameraman() -> Plane {
    Plane::load_luma(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/cameraman.png")).unwrap()
}

/// Row-wise three-tap box average with edge padding, floored to integers.
fn box3(a: &Plane) -> Plane {
    Plane::from_fn(a.width, a.height, |x, y| {
        let l = a.at(x.saturating_sub(1), y);
        let r = a.at((x + 1).min(a.width - 1), y);
        ((l + a.at(x, y) + r) / 3.0).floor()
    })
}

/// Gaussian-weighted SSIM computed window by window with no separability.
fn naive_ssim(a: &Plane, b: &Plane, win: usize, sigma: f64) -> f64 {
    let r = (win / 2) as isize;
    let mut k = vec![0.0; win * win];
    for i in 0..win {
        for j in 0..win {
            let (di, dj) = (i as f64 - r as f64, j as f64 - r as f64);
            k[i * win + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let t: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= t);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = 0.0;
    let mut n = 0;
    for y in 0..=a.height - win {
        for x in 0..=a.width - win {
            let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let w = k[i * win + j];
                    let (va, vb) = (a.at(x + j, y + i), b.at(x + j, y + i));
                    ma += w * va;
                    mb += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            }
            let (va, vb, cov) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn ssim_and_psnr_match_reference_on_cameraman() {
    let a = cameraman();
    let b = box3(&a);
    let s = ssim(&a, &b, &SsimParams::default()).unwrap();
    let p = psnr(&a, &b, 255.0).unwrap();
    assert!((s - 0.9103878676976729).abs() < 1e-6, "ssim {s}");
    assert!((p - 30.982039522037162).abs() < 1e-9, "psnr {p}");
}

#[test]
fn ssim_matches_naive_windows() {
    let a = Plane::from_fn(24, 19, |x, y| ((x * 37 + y * 91) % 251) as f64);
    let b = Plane::from_fn(24, 19, |x, y| ((x * 11 + y * 5 + 40) % 256) as f64);
    let fast = ssim(&a, &b, &SsimParams::default()).unwrap();
    let slow = naive_ssim(&a, &b, 11, 1.5);
    assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
}

#[test]
fn cpbd_matches_reference_on_cameraman() {
    let sharp = cpbd(&cameraman(), 255.0, &CpbdParams::default()).unwrap();
    println!("cpbd sharp = {}", sharp.score);
    assert!((sharp.score - 0.7481657466284677).abs() < 0.02, "{}", sharp.score);
}

/// Gaussian blur with reflect padding, the same operator the reference used.
fn gaussian_blur(a: &Plane, sigma: f64) -> Plane {
    let r = (4.0 * sigma + 0.5) as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let t: f64 = k.iter().sum();
    let refl = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let m = i.rem_euclid(2 * n);
        (if m >= n { 2 * n - 1 - m } else { m }) as usize
    };
    let h = Plane::from_fn(a.width, a.height, |x, y| {
        (-r..=r).map(|d| k[(d + r) as usize] * a.at(refl(x as isize + d, a.width), y)).sum::<f64>() / t
    });
    Plane::from_fn(a.width, a.height, |x, y| {
        (-r..=r).map(|d| k[(d + r) as usize] * h.at(x, refl(y as isize + d, a.height))).sum::<f64>() / t
    })
}

#[test]
fn cpbd_drops_under_blur() {
    let blurred = gaussian_blur(&cameraman(), 3.0);
    let s = cpbd(&blurred, 255.0, &CpbdParams::default()).unwrap();
    println!("cpbd blurred = {}", s.score);
    assert!((s.score - 0.0027835768963117608).abs() < 0.02, "{}", s.score);
}

#[test]
fn fid_diagonal_closed_form() {
    let rows_p: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 5) as f64, (i % 7) as f64 * 2.0, (i % 3) as f64]).collect();
    let rows_q: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 5) as f64 + 1.0, (i % 7) as f64 * 0.5, (i % 3) as f64 * 3.0]).collect();
    let p = gaussian_stats(&rows_p).unwrap();
    let q = gaussian_stats(&rows_q).unwrap();
    let d = frechet_distance(&p, &q).unwrap();
    assert!(d >= 0.0);
    // keep only the variances so the trace term reduces to per-axis sums
    let mut expect = (&p.mean - &q.mean).norm_squared();
    let pd = DMatrix::from_diagonal(&p.covariance.diagonal());
    let qd = DMatrix::from_diagonal(&q.covariance.diagonal());
    let pd_stats = GaussianStats::new(p.mean.clone(), pd.clone(), 40).unwrap();
    let qd_stats = GaussianStats::new(q.mean.clone(), qd.clone(), 40).unwrap();
    for i in 0..3 {
        let (a, b) = (pd[(i, i)], qd[(i, i)]);
        expect += a + b - 2.0 * (a * b).sqrt();
    }
    let dd = frechet_distance(&pd_stats, &qd_stats).unwrap();
    assert!((dd - expect).abs() < 1e-9, "{dd} vs {expect}");
}

proptest! {
    #[test]
    fn fid_is_symmetric_and_zero_on_self(seed in proptest::collection::vec(-5.0f64..5.0, 24)) {
        let rows: Vec<Vec<f64>> = seed.chunks(3).map(|c| c.to_vec()).collect();
        let rows2: Vec<Vec<f64>> = seed.chunks(3).map(|c| vec![c[1] * 2.0, c[0] + 1.0, c[2]]).collect();
        let p = gaussian_stats(&rows).unwrap();
        let q = gaussian_stats(&rows2).unwrap();
        let self_d = frechet_distance(&p, &p).unwrap();
        prop_assert!(self_d.abs() <= 1e-6 * (1.0 + p.covariance.trace()));
        let pq = frechet_distance(&p, &q).unwrap();
        let qp = frechet_distance(&q, &p).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - qp).abs() <= 1e-6 * (1.0 + pq));
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in proptest::collection::vec(0u8..=255, 16 * 16), b in proptest::collection::vec(0u8..=255, 16 * 16)) {
        let pa = Plane::from_fn(16, 16, |x, y| a[y * 16 + x] as f64);
        let pb = Plane::from_fn(16, 16, |x, y| b[y * 16 + x] as f64);
        let ab = ssim(&pa, &pb, &SsimParams::default()).unwrap();
        let ba = ssim(&pb, &pa, &SsimParams::default()).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        prop_assert_eq!(ssim(&pa, &pa, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn psnr_is_symmetric(a in proptest::collection::vec(0u8..=255, 64), b in proptest::collection::vec(0u8..=255, 64)) {
        let pa = Plane::from_fn(8, 8, |x, y| a[y * 8 + x] as f64);
        let pb = Plane::from_fn(8, 8, |x, y| b[y * 8 + x] as f64);
        prop_assert_eq!(psnr(&pa, &pb, 255.0).unwrap(), psnr(&pb, &pa, 255.0).unwrap());
    }
}
