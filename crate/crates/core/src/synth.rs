//! Synthetic bags with planted target concepts.
//!
//! Positive bags hold at least one witness drawn within `3 * noise_sigma` of a
//! target; their other instances are uniform in the unit hypercube. Negative
//! instances come from Gaussian distractor modes (or the uniform background
//! when no modes are given) and are rejected when they land within
//! `6 * noise_sigma` of any target.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::squared_distance;
use crate::data::{Bag, Dataset, Instance, Label, MulticlassBag, MulticlassDataset};
use crate::error::{GmilError, Result};

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dimension: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Inclusive range of bag sizes.
    pub instances_per_bag: (usize, usize),
    pub targets: Vec<Vec<f64>>,
    pub negative_modes: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    /// Fraction of each positive bag drawn near a target; at least one instance always is.
    pub witness_rate: f64,
    pub seed: u64,
}

/// What the generator planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub targets: Vec<Vec<f64>>,
    pub negative_modes: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Per bag: index of the target its witnesses surround (`None` for negative bags).
    pub bag_target: Vec<Option<usize>>,
    /// Per bag: indices of witness instances.
    pub witnesses: Vec<Vec<usize>>,
    /// Per bag: smallest distance between any of its instances and any target.
    pub min_target_distance: Vec<f64>,
}

impl SynthSpec {
    /// One target and three distractor modes placed at random (from `seed`)
    /// inside `[0.15, 0.85]^d`, pairwise at least `max(0.25, 12 * sigma)` apart.
    /// Fails with [`GmilError::Unsatisfiable`] when they do not fit (e.g. `d = 1`).
    pub fn planted(dimension: usize, n_pos: usize, n_neg: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        let layout = random_layout(dimension, 4, noise_sigma, seed)?;
        let (target, modes) = layout.split_at(1);
        Ok(SynthSpec {
            dimension,
            n_pos,
            n_neg,
            instances_per_bag: (4, 8),
            targets: target.to_vec(),
            negative_modes: modes.to_vec(),
            noise_sigma,
            witness_rate: 0.0,
            seed,
        })
    }

    /// Same concept layout, fresh instances.
    pub fn reseeded(&self, seed: u64) -> Self {
        SynthSpec { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        let unsat = |m: String| Err(GmilError::Unsatisfiable(m));
        if self.n_pos == 0 {
            return Err(GmilError::param("synthetic data needs at least one positive bag"));
        }
        if self.dimension == 0 {
            return Err(GmilError::param("dimension must be at least 1"));
        }
        let (lo, hi) = self.instances_per_bag;
        if lo == 0 || lo > hi {
            return Err(GmilError::param(format!("invalid bag size range {lo}..={hi}")));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(GmilError::param("noise sigma must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.witness_rate) {
            return Err(GmilError::param("witness rate must lie in [0, 1]"));
        }
        if self.targets.is_empty() {
            return Err(GmilError::param("at least one target point is required"));
        }
        for p in self.targets.iter().chain(&self.negative_modes) {
            if p.len() != self.dimension {
                return Err(GmilError::DimensionMismatch {
                    expected: self.dimension,
                    found: p.len(),
                });
            }
        }
        let margin = 6.0 * self.noise_sigma;
        for t in &self.targets {
            for m in &self.negative_modes {
                if squared_distance(t, m).sqrt() <= margin {
                    return unsat(format!("target {t:?} and mode {m:?} are within 6 sigma"));
                }
            }
        }
        Ok(())
    }
}

fn random_layout(d: usize, count: usize, sigma: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let min_gap = (12.0 * sigma).max(0.25);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..MAX_REJECTIONS {
        if pts.len() == count {
            break;
        }
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(0.15..0.85)).collect();
        if pts.iter().all(|q| squared_distance(q, &p).sqrt() >= min_gap) {
            pts.push(p);
        }
    }
    if pts.len() < count {
        return Err(GmilError::Unsatisfiable(format!(
            "could not place {count} points {min_gap} apart in {d} dimensions"
        )));
    }
    Ok(pts)
}

struct Sampler {
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    d: usize,
}

impl Sampler {
    fn uniform(&mut self) -> Vec<f64> {
        (0..self.d).map(|_| self.rng.random::<f64>()).collect()
    }

    fn around(&mut self, center: &[f64]) -> Vec<f64> {
        match self.noise {
            Some(n) => center.iter().map(|c| c + n.sample(&mut self.rng)).collect(),
            None => center.to_vec(),
        }
    }

    /// A point within `3 sigma` of `center`.
    fn witness(&mut self, center: &[f64], sigma: f64) -> Result<Vec<f64>> {
        for _ in 0..MAX_REJECTIONS {
            let x = self.around(center);
            if squared_distance(&x, center).sqrt() <= 3.0 * sigma {
                return Ok(x);
            }
        }
        Err(GmilError::Unsatisfiable(
            "witness rejection sampling did not terminate".into(),
        ))
    }

    /// A distractor farther than `6 sigma` from every target.
    fn distractor(&mut self, modes: &[Vec<f64>], targets: &[Vec<f64>], sigma: f64) -> Result<Vec<f64>> {
        for _ in 0..MAX_REJECTIONS {
            let x = if modes.is_empty() {
                self.uniform()
            } else {
                let m = self.rng.random_range(0..modes.len());
                self.around(&modes[m])
            };
            if targets.iter().all(|t| squared_distance(&x, t).sqrt() > 6.0 * sigma) {
                return Ok(x);
            }
        }
        Err(GmilError::Unsatisfiable(
            "distractor rejection sampling did not terminate".into(),
        ))
    }
}

fn min_target_distance(instances: &[Instance], targets: &[Vec<f64>]) -> f64 {
    instances
        .iter()
        .flat_map(|x| targets.iter().map(move |t| squared_distance(x, t)))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Draws a dataset from `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let sigma = spec.noise_sigma;
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        noise: if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).expect("finite sigma"))
        } else {
            None
        },
        d: spec.dimension,
    };
    let (lo, hi) = spec.instances_per_bag;

    let mut bags = Vec::with_capacity(spec.n_pos + spec.n_neg);
    let mut bag_target = Vec::with_capacity(bags.capacity());
    let mut witnesses = Vec::with_capacity(bags.capacity());

    for i in 0..spec.n_pos {
        let m = s.rng.random_range(lo..=hi);
        let w = ((spec.witness_rate * m as f64).round() as usize).clamp(1, m);
        let t = s.rng.random_range(0..spec.targets.len());
        let mut slots = index::sample(&mut s.rng, m, w).into_vec();
        slots.sort_unstable();
        let mut instances = Vec::with_capacity(m);
        for j in 0..m {
            let x = if slots.binary_search(&j).is_ok() {
                s.witness(&spec.targets[t], sigma)?
            } else {
                s.uniform()
            };
            instances.push(Instance(x));
        }
        bags.push(Bag::new(format!("pos-{i:04}"), Label::Positive, instances)?);
        bag_target.push(Some(t));
        witnesses.push(slots);
    }

    for i in 0..spec.n_neg {
        let m = s.rng.random_range(lo..=hi);
        let instances = (0..m)
            .map(|_| s.distractor(&spec.negative_modes, &spec.targets, sigma).map(Instance))
            .collect::<Result<Vec<_>>>()?;
        bags.push(Bag::new(format!("neg-{i:04}"), Label::Negative, instances)?);
        bag_target.push(None);
        witnesses.push(Vec::new());
    }

    let min_target_distance = bags
        .iter()
        .map(|b| min_target_distance(&b.instances, &spec.targets))
        .collect();
    let truth = GroundTruth {
        targets: spec.targets.clone(),
        negative_modes: spec.negative_modes.clone(),
        noise_sigma: sigma,
        seed: spec.seed,
        bag_target,
        witnesses,
        min_target_distance,
    };
    Ok((Dataset::new(bags)?, truth))
}

/// `n_classes` classes, each with its own planted target. Every bag of class
/// `c` carries a witness of target `c` among uniform background instances.
pub fn generate_multiclass(
    dimension: usize,
    n_classes: usize,
    bags_per_class: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(MulticlassDataset, Vec<Vec<f64>>)> {
    if n_classes < 2 {
        return Err(GmilError::param("need at least two classes"));
    }
    let targets = random_layout(dimension, n_classes, noise_sigma, seed)?;
    let mut bags = Vec::with_capacity(n_classes * bags_per_class);
    for (c, t) in targets.iter().enumerate() {
        let spec = SynthSpec {
            dimension,
            n_pos: bags_per_class,
            n_neg: 0,
            instances_per_bag: (4, 8),
            targets: vec![t.clone()],
            negative_modes: Vec::new(),
            noise_sigma,
            witness_rate: 0.0,
            seed: seed.wrapping_mul(31).wrapping_add(c as u64 + 1),
        };
        let (ds, _) = generate(&spec)?;
        bags.extend(ds.bags.into_iter().map(|b| MulticlassBag {
            id: format!("c{c}-{}", b.id),
            class: format!("class{c}"),
            instances: b.instances,
        }));
    }
    Ok((MulticlassDataset { dimension, bags }, targets))
}
