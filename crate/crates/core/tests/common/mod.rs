#![allow(dead_code)]

use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gmil::data::{Bag, Dataset, Instance, Label};

pub fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Random dataset with both classes: `bags` bags of 1..=5 instances in `[-5, 5]^d`.
pub fn random_dataset(seed: u64, bags: usize, d: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bags = (0..bags.max(2))
        .map(|i| {
            let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
            let n = rng.random_range(1..=5);
            let inst = (0..n)
                .map(|_| Instance((0..d).map(|_| rng.random_range(-5.0..5.0)).collect()))
                .collect();
            Bag::new(format!("b{i}"), label, inst).unwrap()
        })
        .collect();
    Dataset::new(bags).unwrap()
}

pub fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (any::<u64>(), 2usize..12, 1usize..5).prop_map(|(s, b, d)| random_dataset(s, b, d))
}

/// Points around `centers`, `per` each, Gaussian with standard deviation `sd`.
pub fn blobs(centers: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).unwrap();
    let mut pts = Vec::new();
    let mut owner = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            pts.push(center.iter().map(|m| m + normal.sample(&mut rng)).collect());
            owner.push(c);
        }
    }
    (pts, owner)
}

pub fn brute_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

pub fn brute_nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..centroids.len() {
        if brute_sq(x, &centroids[j]) < brute_sq(x, &centroids[best]) {
            best = j;
        }
    }
    best
}
