#![allow(dead_code)]

use std::path::PathBuf;

use ::korm::{load_dataset, Dataset, DatasetSchema, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn load(name: &str, schema: &str) -> Dataset {
    let dir = data_dir();
    let schema = DatasetSchema::parse(&std::fs::read_to_string(dir.join(schema)).unwrap()).unwrap();
    load_dataset(dir.join(name), &schema).unwrap()
}

pub fn abalone() -> Dataset {
    let real = data_dir().join("abalone.data");
    if real.exists() {
        load("abalone.data", "abalone.schema")
    } else {
        load("abalone_keel.data", "abalone.schema")
    }
}

pub fn tae() -> Dataset {
    load("tae.data", "tae.schema")
}

pub fn pt(v: &[f64]) -> Point {
    Point::new(v.to_vec()).unwrap()
}

/// Three unit-variance blobs with 100 points each, centres 10 apart, plus one
/// point 50 away from the nearest centre inserted at a random position in the
/// first `first_chunk` points. Returns the stream and the planted index.
pub fn planted_blobs(seed: u64, first_chunk: usize) -> (Vec<Point>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut pts = Vec::with_capacity(301);
    for c in centres {
        for _ in 0..100 {
            pts.push(pt(&[c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]));
        }
    }
    // Fisher-Yates so every chunk mixes the blobs
    for i in (1..pts.len()).rev() {
        let j = rng.random_range(0..=i);
        pts.swap(i, j);
    }
    let at = rng.random_range(0..first_chunk);
    pts.insert(at, pt(&[0.0, 60.0]));
    (pts, at)
}

/// Gaussian mixture with `clusters` centres in `[0, 100]^dim`.
pub fn mixture(rng: &mut ChaCha8Rng, n: usize, dim: usize, clusters: usize) -> Vec<Point> {
    let centres: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..100.0)).collect())
        .collect();
    let spread = rng.random_range(0.5..5.0);
    let noise = Normal::new(0.0, spread).unwrap();
    (0..n)
        .map(|_| {
            let c = &centres[rng.random_range(0..clusters)];
            pt(&c.iter().map(|x| x + noise.sample(rng)).collect::<Vec<_>>())
        })
        .collect()
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}
