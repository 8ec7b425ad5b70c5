use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use sriq_core::metrics::{auc, auc_compare, delong_ci, iq_metrics, roc_curve};
use sriq_core::metrics::iq::{mse, ssim};
use sriq_core::{rng, ImageGrid};

fn brute_auc(s0: &[f64], s1: &[f64]) -> f64 {
    let mut total = 0.0;
    for &b in s1 {
        for &a in s0 {
            total += if b > a {
                1.0
            } else if b == a {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (s0.len() * s1.len()) as f64
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

fn small_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..6).prop_map(|v| v as f64 * 0.5), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn midrank_auc_equals_pair_counting(s0 in small_scores(), s1 in small_scores()) {
        prop_assert_eq!(auc(&s0, &s1).unwrap(), brute_auc(&s0, &s1));
    }

    #[test]
    fn swapping_classes_complements(s0 in small_scores(), s1 in small_scores()) {
        let a = auc(&s0, &s1).unwrap();
        prop_assert!((a - (1.0 - auc(&s1, &s0).unwrap())).abs() < 1e-15);
    }

    #[test]
    fn increasing_transforms_keep_auc(s0 in small_scores(), s1 in small_scores()) {
        let t = |v: &[f64]| v.iter().map(|x| (x * 0.7).exp() * 5.0 - 2.0).collect::<Vec<f64>>();
        prop_assert_eq!(auc(&s0, &s1).unwrap(), auc(&t(&s0), &t(&s1)).unwrap());
    }

    #[test]
    fn auc_is_trapezoid_area(s0 in small_scores(), s1 in small_scores()) {
        let curve = roc_curve(&s0, &s1).unwrap();
        prop_assert!((trapezoid(&curve) - auc(&s0, &s1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ci_contains_estimate(s0 in prop::collection::vec(-3.0f64..3.0, 2..30), s1 in prop::collection::vec(-3.0f64..3.0, 2..30)) {
        let r = delong_ci(&s0, &s1, 0.95).unwrap();
        prop_assert!(r.ci.0 <= r.auc && r.auc <= r.ci.1);
        prop_assert!(r.ci.0 >= 0.0 && r.ci.1 <= 1.0);
    }
}

#[test]
fn spec_examples() {
    assert_eq!(auc(&[0.1, 0.2], &[0.3, 0.4]).unwrap(), 1.0);
    assert_eq!(auc(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.5);
    assert_eq!(auc(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 0.875);
    assert!(auc(&[], &[1.0]).is_err());
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[test]
fn delong_matches_bootstrap() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut r = rng::rng(21);
    let s0: Vec<f64> = (0..200).map(|_| normal.sample(&mut r)).collect();
    let s1: Vec<f64> = (0..200).map(|_| 1.0 + normal.sample(&mut r)).collect();
    let d = delong_ci(&s0, &s1, 0.95).unwrap();
    let mut boot: Vec<f64> = (0..2000)
        .map(|_| {
            let b0: Vec<f64> = (0..200).map(|_| s0[r.gen_range(0..200)]).collect();
            let b1: Vec<f64> = (0..200).map(|_| s1[r.gen_range(0..200)]).collect();
            auc(&b0, &b1).unwrap()
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let (lo, hi) = (percentile(&boot, 0.025), percentile(&boot, 0.975));
    assert!((d.ci.0 - lo).abs() < 0.02 && (d.ci.1 - hi).abs() < 0.02, "{:?} vs ({lo}, {hi})", d.ci);
}

#[test]
fn delong_variance_vanishes_with_spread() {
    let mut prev = f64::INFINITY;
    for spread in [1.0, 0.3, 0.1, 0.01] {
        let s0: Vec<f64> = (0..50).map(|i| spread * ((i as f64) * 0.37).sin()).collect();
        let s1: Vec<f64> = (0..50).map(|i| 1.0 + spread * ((i as f64) * 0.91).cos()).collect();
        let v = delong_ci(&s0, &s1, 0.95).unwrap().variance;
        assert!(v <= prev);
        prev = v;
    }
    assert_eq!(prev, 0.0);
}

/// Paired permutation test: swap the two observers' scores image by image.
fn permutation_p(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64], rounds: usize, seed: u64) -> f64 {
    let observed = (auc(a0, a1).unwrap() - auc(b0, b1).unwrap()).abs();
    let mut r = rng::rng(seed);
    let mut hits = 0;
    for _ in 0..rounds {
        let (mut x0, mut x1, mut y0, mut y1) = (a0.to_vec(), a1.to_vec(), b0.to_vec(), b1.to_vec());
        for i in 0..x0.len() {
            if r.gen::<bool>() {
                std::mem::swap(&mut x0[i], &mut y0[i]);
            }
        }
        for i in 0..x1.len() {
            if r.gen::<bool>() {
                std::mem::swap(&mut x1[i], &mut y1[i]);
            }
        }
        if (auc(&x0, &x1).unwrap() - auc(&y0, &y1).unwrap()).abs() >= observed - 1e-15 {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (rounds + 1) as f64
}

#[test]
fn paired_comparison_agrees_with_permutations() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    for (seed, extra) in [(1u64, 0.05), (2, 0.6), (3, 1.2)] {
        let mut r = rng::rng(seed);
        let a0: Vec<f64> = (0..200).map(|_| normal.sample(&mut r)).collect();
        let a1: Vec<f64> = (0..200).map(|_| 1.2 + normal.sample(&mut r)).collect();
        let b0: Vec<f64> = a0.iter().map(|v| v + extra * normal.sample(&mut r)).collect();
        let b1: Vec<f64> = a1.iter().map(|v| v + extra * normal.sample(&mut r)).collect();
        let cmp = auc_compare(&a0, &a1, &b0, &b1, 0.05).unwrap();
        let p = permutation_p(&a0, &a1, &b0, &b1, 1000, seed + 100);
        assert_eq!(cmp.significant, p < 0.05, "extra {extra}: DeLong p {} vs permutation p {p}", cmp.p_value);
    }
    let s0 = [0.1, 0.4, 0.3];
    let s1 = [0.5, 0.2, 0.9];
    let same = auc_compare(&s0, &s1, &s0, &s1, 0.05).unwrap();
    assert_eq!(same.difference, 0.0);
    assert!(!same.significant);
}

#[test]
fn dominating_observer_is_significant() {
    let mut r = rng::rng(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let b0: Vec<f64> = (0..300).map(|_| normal.sample(&mut r)).collect();
    let b1: Vec<f64> = (0..300).map(|_| 0.5 + normal.sample(&mut r)).collect();
    let a0: Vec<f64> = (0..300).map(|i| -10.0 - i as f64).collect();
    let a1: Vec<f64> = (0..300).map(|i| 10.0 + i as f64).collect();
    assert!(auc_compare(&a0, &a1, &b0, &b1, 0.05).unwrap().significant);
}

#[test]
fn image_quality_examples() {
    let c = 1.7f32;
    let zero = ImageGrid::zeros(16, 16);
    assert!((mse(&zero, &ImageGrid::filled(16, 16, c)).unwrap() - (c as f64).powi(2)).abs() < 1e-9);
    let mut order: Vec<usize> = (0..256).collect();
    order.shuffle(&mut rng::rng(3));
    let f = ImageGrid::from_fn(16, 16, |x, y| order[x + 16 * y] as f32 / 10.0);
    let g = ImageGrid::from_fn(16, 16, |x, y| ((x * y) % 7) as f32);
    assert!((ssim(&f, &f, 25.5).unwrap() - 1.0).abs() < 1e-12);
    assert!((ssim(&f, &g, 25.5).unwrap() - ssim(&g, &f, 25.5).unwrap()).abs() < 1e-12);
    let m = iq_metrics(&f, &g, 25.5).unwrap();
    assert!(m.mse > 0.0 && m.ssim <= 1.0 && m.psnr.is_finite());
}
