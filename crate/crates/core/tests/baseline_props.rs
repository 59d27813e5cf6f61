mod common;

use ::korm::baselines::{db_nested_loop, dk_outliers};
use ::korm::{Metric, Point};
use common::{pt, sq};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every pair compared, no early exit.
fn db_naive(points: &[Point], radius: f64, fraction: f64) -> Vec<usize> {
    let n = points.len();
    (0..n)
        .filter(|&i| {
            let far = (0..n)
                .filter(|&j| j != i && sq(points[i].coords(), points[j].coords()).sqrt() > radius)
                .count();
            far as f64 >= fraction * (n - 1) as f64 - 1e-9
        })
        .collect()
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Point> {
    (0..n)
        .map(|_| pt(&(0..dim).map(|_| rng.random_range(0.0..10.0)).collect::<Vec<_>>()))
        .collect()
}

#[test]
fn early_exit_matches_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut nonempty = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..120);
        let dim = rng.random_range(1..4);
        let pts = cloud(&mut rng, n, dim);
        let radius = rng.random_range(0.2..6.0);
        let fraction = rng.random_range(0.05..0.99);
        let got = db_nested_loop(&pts, radius, fraction, Metric::Euclidean).unwrap();
        assert_eq!(got, db_naive(&pts, radius, fraction));
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_ranking_is_a_sorted_permutation(seed in any::<u64>(), n in 2usize..60, knn in 1usize..5) {
        prop_assume!(knn < n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = cloud(&mut rng, n, 2);
        let r = dk_outliers(&pts, knn, n, Metric::Euclidean).unwrap();
        let mut idx: Vec<usize> = r.iter().map(|e| e.index).collect();
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..n).collect::<Vec<_>>());
        for w in r.windows(2) {
            prop_assert!(w[0].dk > w[1].dk || (w[0].dk == w[1].dk && w[0].index < w[1].index));
        }
        // brute-force K-th neighbour distance
        for e in &r {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != e.index)
                .map(|j| sq(pts[e.index].coords(), pts[j].coords()).sqrt()).collect();
            d.sort_by(f64::total_cmp);
            prop_assert_eq!(e.dk, d[knn - 1]);
        }
    }

    #[test]
    fn larger_radius_never_adds(seed in any::<u64>(), n in 2usize..80, r1 in 0.1f64..5.0, dr in 0.0f64..5.0, p in 0.05f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = cloud(&mut rng, n, 2);
        let small = db_nested_loop(&pts, r1, p, Metric::Euclidean).unwrap();
        let large = db_nested_loop(&pts, r1 + dr, p, Metric::Euclidean).unwrap();
        prop_assert!(large.iter().all(|i| small.contains(i)));
    }

    #[test]
    fn higher_fraction_never_adds(seed in any::<u64>(), n in 2usize..80, r in 0.1f64..5.0, p1 in 0.05f64..0.98, dp in 0.0f64..0.5) {
        let p2 = (p1 + dp).min(0.99);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = cloud(&mut rng, n, 2);
        let low = db_nested_loop(&pts, r, p1, Metric::Euclidean).unwrap();
        let high = db_nested_loop(&pts, r, p2, Metric::Euclidean).unwrap();
        prop_assert!(high.iter().all(|i| low.contains(i)));
    }
}
