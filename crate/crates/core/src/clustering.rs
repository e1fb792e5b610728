//! k-means++ seeding and Lloyd iteration over pooled instances, with the
//! subsample-then-assign shortcut for large training sets.
//!
//! Distances are squared Euclidean. Every reduction runs in a fixed order,
//! so results do not depend on the size of the rayon pool.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GmilError, Result};

/// Below this many points per task the assignment pass stays on one thread.
const PAR_MIN_LEN: usize = 512;

/// Learned centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    /// Seed that produced the initialization, when the model came from seeding.
    pub seed: Option<u64>,
    /// Sum of squared distances from every clustered point to its nearest centroid.
    pub inertia: f64,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

/// Cluster index per point, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydConfig {
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tol: f64,
}

impl Default for LloydConfig {
    fn default() -> Self {
        LloydConfig {
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Inertia observed at each assignment pass, and the passes after which an
/// empty cluster had to be re-seeded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LloydTrace {
    pub inertia: Vec<f64>,
    pub reseeds: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub model: ClusterModel,
    pub assignment: Assignment,
    pub trace: LloydTrace,
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest index.
#[inline]
pub fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn nearest_all<P: AsRef<[f64]> + Sync>(points: &[P], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| nearest(centroids, p.as_ref()))
        .collect()
}

fn check_dims<P: AsRef<[f64]>>(points: &[P], d: usize) -> Result<()> {
    for p in points {
        let found = p.as_ref().len();
        if found != d {
            return Err(GmilError::DimensionMismatch { expected: d, found });
        }
    }
    Ok(())
}

/// k-means++ seeding: the first centroid is uniform over the points, each
/// later one is drawn with probability proportional to its squared distance
/// to the nearest centroid chosen so far.
pub fn kmeans_pp_init<P: AsRef<[f64]> + Sync>(points: &[P], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(GmilError::param("number of clusters must be at least 1"));
    }
    if points.len() < k {
        return Err(GmilError::TooFewPoints {
            points: points.len(),
            clusters: k,
        });
    }
    let d = points[0].as_ref().len();
    check_dims(points, d)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].as_ref().to_vec()];
    let mut weights: Vec<f64> = points
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| squared_distance(p.as_ref(), &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(GmilError::DegenerateSeeding);
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(i);
            if acc > target {
                break;
            }
        }
        let chosen = chosen.expect("positive total weight implies a positive entry");
        let c = points[chosen].as_ref().to_vec();
        weights
            .par_iter_mut()
            .with_min_len(PAR_MIN_LEN)
            .zip(points.par_iter())
            .for_each(|(w, p)| {
                let dn = squared_distance(p.as_ref(), &c);
                if dn < *w {
                    *w = dn;
                }
            });
        centroids.push(c);
    }
    Ok(centroids)
}

/// Lloyd iteration from `init` until the largest centroid move drops below
/// `cfg.tol` or `cfg.max_iter` passes have run.
///
/// An empty cluster is re-seeded at the point currently farthest from its
/// own centroid (distinct points for several empty clusters).
pub fn lloyd<P: AsRef<[f64]> + Sync>(points: &[P], init: Vec<Vec<f64>>, cfg: &LloydConfig) -> Result<Clustering> {
    let k = init.len();
    if k == 0 {
        return Err(GmilError::param("no initial centroids"));
    }
    if points.is_empty() {
        return Err(GmilError::TooFewPoints { points: 0, clusters: k });
    }
    let d = init[0].len();
    check_dims(&init, d)?;
    check_dims(points, d)?;

    let mut centroids = init;
    let mut trace = LloydTrace::default();
    let mut iterations = 0;

    loop {
        let nearest = nearest_all(points, &centroids);
        let inertia: f64 = nearest.iter().map(|&(_, dd)| dd).sum();
        trace.inertia.push(inertia);
        if iterations >= cfg.max_iter {
            return Ok(finish(centroids, nearest, inertia, iterations, trace));
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.iter().zip(&nearest) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }

        let mut updated: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| {
                if n == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / n as f64).collect()
                }
            })
            .collect();

        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            let mut by_distance: Vec<usize> = (0..points.len()).collect();
            by_distance.sort_by(|&a, &b| nearest[b].1.total_cmp(&nearest[a].1).then(a.cmp(&b)));
            for (&c, &p) in empty.iter().zip(&by_distance) {
                updated[c] = points[p].as_ref().to_vec();
            }
            trace.reseeds.push(iterations);
        }

        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;

        if shift < cfg.tol && empty.is_empty() {
            let nearest = nearest_all(points, &centroids);
            let inertia: f64 = nearest.iter().map(|&(_, dd)| dd).sum();
            trace.inertia.push(inertia);
            return Ok(finish(centroids, nearest, inertia, iterations, trace));
        }
    }
}

fn finish(
    centroids: Vec<Vec<f64>>,
    nearest: Vec<(usize, f64)>,
    inertia: f64,
    iterations: usize,
    trace: LloydTrace,
) -> Clustering {
    Clustering {
        model: ClusterModel {
            centroids,
            seed: None,
            inertia,
            iterations,
        },
        assignment: Assignment(nearest.into_iter().map(|(c, _)| c).collect()),
        trace,
    }
}

/// k-means++ followed by Lloyd. When there are more than `cap` points the
/// clustering runs on a uniform sample of `cap` of them (without
/// replacement) and every point is then assigned to the resulting centroids.
pub fn cluster_subsampled<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k: usize,
    cap: usize,
    seed: u64,
    cfg: &LloydConfig,
) -> Result<Clustering> {
    if cap < k {
        return Err(GmilError::param(format!("sample cap {cap} is smaller than K = {k}")));
    }
    if points.len() <= cap {
        let init = kmeans_pp_init(points, k, seed)?;
        let mut out = lloyd(points, init, cfg)?;
        out.model.seed = Some(seed);
        return Ok(out);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut picked = index::sample(&mut rng, points.len(), cap).into_vec();
    picked.sort_unstable();
    let sample: Vec<&[f64]> = picked.iter().map(|&i| points[i].as_ref()).collect();

    let init = kmeans_pp_init(&sample, k, seed)?;
    let sub = lloyd(&sample, init, cfg)?;

    let nearest = nearest_all(points, &sub.model.centroids);
    let inertia = nearest.iter().map(|&(_, dd)| dd).sum();
    Ok(Clustering {
        model: ClusterModel {
            centroids: sub.model.centroids,
            seed: Some(seed),
            inertia,
            iterations: sub.model.iterations,
        },
        assignment: Assignment(nearest.into_iter().map(|(c, _)| c).collect()),
        trace: sub.trace,
    })
}

/// Nearest-centroid assignment, ties to the lowest index.
pub fn assign<P: AsRef<[f64]> + Sync>(points: &[P], model: &ClusterModel) -> Result<Assignment> {
    check_dims(points, model.dim())?;
    Ok(Assignment(
        nearest_all(points, &model.centroids)
            .into_iter()
            .map(|(c, _)| c)
            .collect(),
    ))
}
