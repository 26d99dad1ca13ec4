mod common;

use proptest::prelude::*;

use common::{normal, normal_matrix, random_orthogonal, rng};
use rkhskit::dcor::{dcor, dcov, double_center, linear_transform, permutation_test};

/// Textbook double loops with no shared code paths.
#[allow(clippy::needless_range_loop)]
fn naive_dcor(x: &[Vec<f64>], y: &[Vec<f64>]) -> (f64, f64, f64, f64) {
    let n = x.len();
    let dist = |p: &[Vec<f64>], i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..p[i].len() {
            s += (p[i][k] - p[j][k]).powi(2);
        }
        s.sqrt()
    };
    let center = |p: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; n]; n];
        let mut grand = 0.0;
        for i in 0..n {
            for j in 0..n {
                grand += dist(p, i, j);
            }
        }
        grand /= (n * n) as f64;
        for i in 0..n {
            for j in 0..n {
                let mut ri = 0.0;
                let mut cj = 0.0;
                for k in 0..n {
                    ri += dist(p, i, k);
                    cj += dist(p, k, j);
                }
                out[i][j] = dist(p, i, j) - ri / n as f64 - cj / n as f64 + grand;
            }
        }
        out
    };
    let a = center(x);
    let b = center(y);
    let v = |u: &Vec<Vec<f64>>, w: &Vec<Vec<f64>>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += u[i][j] * w[i][j];
            }
        }
        (s / (n * n) as f64).max(0.0).sqrt()
    };
    let (xy, xx, yy) = (v(&a, &b), v(&a, &a), v(&b, &b));
    let r = if xx * yy > 0.0 { xy / (xx * yy).sqrt() } else { 0.0 };
    (xy, xx, yy, r)
}

fn sample(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
    let m = normal_matrix(&mut rng(seed), n, p);
    (0..n).map(|i| m.row(i).iter().copied().collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_naive_oracle(n in 2usize..=6, p in 1usize..4, q in 1usize..4, seed in any::<u64>()) {
        let x = sample(seed, n, p);
        let y = sample(seed ^ 0x5555, n, q);
        let r = dcor(&x, &y).unwrap();
        let (xy, xx, yy, c) = naive_dcor(&x, &y);
        prop_assert!((r.dcov - xy).abs() < 1e-12);
        prop_assert!((r.dvar_x - xx).abs() < 1e-12);
        prop_assert!((r.dvar_y - yy).abs() < 1e-12);
        prop_assert!((r.dcor - c).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.dcor));
    }

    #[test]
    fn invariant_under_similarity_maps(seed in any::<u64>(), shift in -10.0..10.0f64, scale in 0.1..10.0f64) {
        let mut r = rng(seed);
        let x = sample(seed, 12, 3);
        let y: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] * p[1] + 0.3 * normal(&mut r), p[2]]).collect();
        let base = dcor(&x, &y).unwrap().dcor;
        let q = random_orthogonal(&mut r, 3) * scale;
        let moved: Vec<Vec<f64>> = linear_transform(&x, &q).unwrap()
            .into_iter()
            .map(|p| p.into_iter().map(|v| v + shift).collect())
            .collect();
        prop_assert!((dcor(&moved, &y).unwrap().dcor - base).abs() < 1e-10);
        prop_assert!((dcor(&y, &x).unwrap().dcor - base).abs() < 1e-12);
    }
}

#[test]
fn self_and_rotated_copies_have_unit_correlation() {
    for p in 1..=4 {
        let x = sample(p as u64, 15, p);
        assert!((dcor(&x, &x).unwrap().dcor - 1.0).abs() < 1e-12);
        let q = random_orthogonal(&mut rng(99), p);
        let y = linear_transform(&x, &q).unwrap();
        assert!((dcor(&x, &y).unwrap().dcor - 1.0).abs() < 1e-10);
    }
}

#[test]
fn centered_distances_have_zero_margins() {
    let a = double_center(&sample(4, 7, 2)).unwrap();
    for i in 0..7 {
        assert!(a.matrix().row(i).sum().abs() < 1e-10);
        assert!(a.matrix().column(i).sum().abs() < 1e-10);
    }
    let same = dcov(&a, &a).unwrap();
    let direct = (a.matrix().norm_squared() / 49.0).sqrt();
    assert!((same - direct).abs() < 1e-14);
}

#[test]
fn constant_sample_is_degenerate() {
    let x = sample(1, 10, 2);
    let y = vec![vec![3.0]; 10];
    let r = permutation_test(&x, &y, 19, 0).unwrap();
    assert_eq!(r.dcor, 0.0);
    assert!(r.degenerate);
    assert_eq!(r.p_value, Some(1.0));
}

#[test]
fn identical_samples_give_smallest_p_value() {
    let x = sample(2, 30, 2);
    for n_perm in [19, 99, 499] {
        let r = permutation_test(&x, &x, n_perm, 5).unwrap();
        assert_eq!(r.p_value, Some(1.0 / (n_perm + 1) as f64));
    }
    let one = permutation_test(&x, &sample(3, 30, 1), 1, 8).unwrap().p_value.unwrap();
    assert!(one == 0.5 || one == 1.0);
}

#[test]
fn permutation_test_is_seeded_and_thread_independent() {
    let x = sample(6, 25, 2);
    let y = sample(7, 25, 1);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| permutation_test(&x, &y, 199, 42).unwrap());
    let b = four.install(|| permutation_test(&x, &y, 199, 42).unwrap());
    assert_eq!(a, b);
}

#[test]
fn independent_samples_are_calibrated() {
    // Under independence, P(p ≤ 0.01) is at most 0.01 up to the add-one
    // correction; allow five rejections in a hundred.
    let mut accepted = 0;
    for rep in 0..100u64 {
        let x = sample(1000 + rep, 50, 2);
        let y = sample(5000 + rep, 50, 1);
        let p = permutation_test(&x, &y, 199, rep).unwrap().p_value.unwrap();
        if p > 0.01 {
            accepted += 1;
        }
    }
    assert!(accepted >= 95, "{accepted}/100");
}

#[test]
fn dependent_samples_are_detected() {
    let x = sample(11, 60, 1);
    let y: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] * p[0]]).collect();
    let r = permutation_test(&x, &y, 199, 1).unwrap();
    assert!(r.p_value.unwrap() <= 0.01);
}

#[test]
fn shape_errors() {
    let x = sample(1, 5, 2);
    assert!(dcor(&x, &sample(2, 4, 2)).is_err());
    assert!(dcor(&x[..1], &x[..1]).is_err());
    assert!(permutation_test(&x, &x, 0, 0).is_err());
    let ragged = vec![vec![1.0, 2.0], vec![3.0]];
    assert!(double_center(&ragged).is_err());
}
