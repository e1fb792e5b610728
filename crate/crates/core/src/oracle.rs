//! Brute-force reference objectives used to check the codebook method.
//!
//! * the Parzen-window density ratio between positive and negative instances,
//! * the noisy-or Diverse Density likelihood (in log space),
//! * a randomized check that a sum ratio never exceeds the matching product
//!   ratio when every numerator term dominates every denominator term,
//! * the same inequality evaluated on bag-level kernel values over a grid of
//!   candidate points, restricted to candidates where positive window mass
//!   dominates negative window mass bag by bag.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::squared_distance;
use crate::codebook::{FittedBins, TrainParams};
use crate::data::{Bag, Dataset, Instance};
use crate::error::{GmilError, Result};
use crate::synth::{generate, SynthSpec};

/// Added to the window-count denominator so an empty denominator stays finite.
pub const ORACLE_EPSILON: f64 = 1e-12;

/// Relative slack allowed before a sum/product comparison counts as violated.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParzenConfig {
    /// Edge length of the hypercube window.
    pub h: f64,
}

impl Default for ParzenConfig {
    fn default() -> Self {
        ParzenConfig { h: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DDConfig {
    /// Kernel width in `Pr(x = t | B_ij) = exp(-||B_ij - x||^2 / s^2)`.
    pub s: f64,
}

impl Default for DDConfig {
    fn default() -> Self {
        DDConfig { s: 1.0 }
    }
}

/// Hypercube window: 1 iff every coordinate satisfies `|u_j| < 1/2`.
pub fn parzen_window(u: &[f64]) -> u8 {
    u8::from(u.iter().all(|v| v.abs() < 0.5))
}

fn in_window(x: &[f64], inst: &[f64], h: f64) -> bool {
    x.iter().zip(inst).all(|(a, b)| ((b - a) / h).abs() < 0.5)
}

/// Instances of `bag` whose window around `x` contains them.
pub fn window_count(x: &[f64], bag: &Bag, cfg: &ParzenConfig) -> usize {
    bag.instances.iter().filter(|i| in_window(x, i, cfg.h)).count()
}

/// (positive, negative) window counts at `x`.
pub fn window_mass(x: &[f64], ds: &Dataset, cfg: &ParzenConfig) -> (usize, usize) {
    let mut pos = 0;
    let mut neg = 0;
    for bag in &ds.bags {
        let c = window_count(x, bag, cfg);
        if bag.label.is_positive() {
            pos += c;
        } else {
            neg += c;
        }
    }
    (pos, neg)
}

/// Positive window mass over negative window mass (plus [`ORACLE_EPSILON`]).
pub fn density_ratio_at(x: &[f64], ds: &Dataset, cfg: &ParzenConfig) -> f64 {
    let (pos, neg) = window_mass(x, ds, cfg);
    pos as f64 / (neg as f64 + ORACLE_EPSILON)
}

fn log_kernel(x: &[f64], inst: &[f64], cfg: &DDConfig) -> f64 {
    -squared_distance(x, inst) / (cfg.s * cfg.s)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|a| (a - max).exp()).sum::<f64>().ln()
}

/// `ln(1 - e^a)` for `a <= 0`.
fn log1m_exp(a: f64) -> f64 {
    if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// `ln(1 - prod_j (1 - p_j))` from `ln p_j`, accurate when every `p_j` is tiny.
fn log_noisy_or(log_p: &[f64]) -> f64 {
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max < -30.0 {
        // 1 - prod(1 - p) = sum p to within relative sum(p) < 1e-12
        return log_sum_exp(log_p.iter().copied());
    }
    let log_miss: f64 = log_p.iter().map(|&lp| log1m_exp(lp)).sum();
    log1m_exp(log_miss)
}

/// Bag-level noisy-or probability `1 - prod_j (1 - Pr(x = t | B_ij))`, as a log.
pub fn log_bag_probability(x: &[f64], bag: &Bag, cfg: &DDConfig) -> f64 {
    let lp: Vec<f64> = bag.instances.iter().map(|i| log_kernel(x, i, cfg)).collect();
    log_noisy_or(&lp)
}

/// Log of the Diverse Density objective at `x`.
///
/// Positive bags contribute `ln(1 - prod_j (1 - Pr_ij))`, negative bags
/// `sum_j ln(1 - Pr_ij)`. The value is `-inf` when `x` sits exactly on a
/// negative instance.
pub fn dd_objective_at(x: &[f64], ds: &Dataset, cfg: &DDConfig) -> f64 {
    let mut total = 0.0;
    for bag in &ds.bags {
        if bag.label.is_positive() {
            total += log_bag_probability(x, bag, cfg);
        } else {
            total += bag
                .instances
                .iter()
                .map(|i| log1m_exp(log_kernel(x, i, cfg)))
                .sum::<f64>();
        }
    }
    total
}

/// `(ln(sum v+ / sum v-), ln(prod v+ / prod v-))` from log values.
pub fn log_ratios(log_pos: &[f64], log_neg: &[f64]) -> (f64, f64) {
    let sum_ratio = log_sum_exp(log_pos.iter().copied()) - log_sum_exp(log_neg.iter().copied());
    let prod_ratio = log_pos.iter().sum::<f64>() - log_neg.iter().sum::<f64>();
    (sum_ratio, prod_ratio)
}

fn violates(log_sum: f64, log_prod: f64) -> bool {
    log_sum - log_prod > RELATIVE_TOLERANCE.ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub trials: usize,
    /// Trials whose negative values were drawn within 1e-6 of the smallest positive value.
    pub near_equality_trials: usize,
    pub violations: usize,
    /// Smallest observed `ln(product ratio) - ln(sum ratio)`.
    pub worst_log_slack: f64,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const TRIALS_PER_STREAM: usize = 1024;

/// Draws `trials` random instances of the sum/product inequality. Each trial
/// picks `n` uniformly from `n_values`, draws `v+` uniform in `(0, 1]` and
/// `v-` uniform in `(0, min v+]`; every tenth trial squeezes `v-` to within
/// `1e-6` of `min v+`.
pub fn verify_theorem1(trials: usize, n_values: &[usize], seed: u64) -> Result<Theorem1Report> {
    if trials == 0 {
        return Err(GmilError::param("at least one trial is required"));
    }
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(GmilError::param("n must be at least 1"));
    }
    let streams = trials.div_ceil(TRIALS_PER_STREAM);
    let partial: Vec<(usize, usize, f64)> = (0..streams)
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream as u64);
            let start = stream * TRIALS_PER_STREAM;
            let end = (start + TRIALS_PER_STREAM).min(trials);
            let mut near = 0;
            let mut bad = 0;
            let mut worst = f64::INFINITY;
            for t in start..end {
                let n = n_values[rng.random_range(0..n_values.len())];
                let pos: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
                let floor = pos.iter().copied().fold(1.0, f64::min);
                let squeeze = t % 10 == 9;
                let neg: Vec<f64> = (0..n)
                    .map(|_| {
                        let u = 1.0 - rng.random::<f64>();
                        if squeeze {
                            floor * (1.0 - 1e-6 * (1.0 - u))
                        } else {
                            floor * u
                        }
                    })
                    .collect();
                near += usize::from(squeeze);
                let lp: Vec<f64> = pos.iter().map(|v| v.ln()).collect();
                let ln: Vec<f64> = neg.iter().map(|v| v.ln()).collect();
                let (s, p) = log_ratios(&lp, &ln);
                bad += usize::from(violates(s, p));
                worst = worst.min(p - s);
            }
            (near, bad, worst)
        })
        .collect();
    Ok(Theorem1Report {
        trials,
        near_equality_trials: partial.iter().map(|p| p.0).sum(),
        violations: partial.iter().map(|p| p.1).sum(),
        worst_log_slack: partial.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
    })
}

/// Centers of a regular grid with `steps` cells per axis over `[lo, hi]^d`.
pub fn grid_points(d: usize, lo: f64, hi: f64, steps: usize) -> Vec<Vec<f64>> {
    let step = (hi - lo) / steps as f64;
    let mut out = vec![Vec::with_capacity(d)];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..steps).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(lo + (i as f64 + 0.5) * step);
                    p
                })
            })
            .collect();
    }
    out
}

fn nearest_index(points: &[Vec<f64>], x: &[f64]) -> usize {
    crate::clustering::nearest(points, x).0
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundChainReport {
    pub candidates: usize,
    /// Candidates where every positive bag's window count is at least its paired negative bag's.
    pub window_premise: usize,
    /// Of those, candidates where every positive bag value dominates every negative one.
    pub qualifying: usize,
    pub violations: usize,
    /// Smallest `ln(product ratio) - ln(sum ratio)` over qualifying candidates.
    pub worst_log_slack: f64,
    /// Window-premise candidates outside the kernel premise where the inequality fails anyway.
    pub window_only_failures: usize,
    pub density_ratio_argmax: usize,
    pub dd_argmax: usize,
    /// Grid index nearest to the planted target, when one was given.
    pub target_cell: Option<usize>,
    pub target_qualifies: Option<bool>,
}

impl BoundChainReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn argmaxes_hit_target(&self) -> Option<bool> {
        self.target_cell
            .map(|t| t == self.density_ratio_argmax && t == self.dd_argmax)
    }
}

/// Evaluates both objectives on every grid candidate and checks the
/// product-ratio >= sum-ratio bound on bag-level noisy-or values wherever the
/// premises hold. Positive bag `i` is paired with negative bag `i`, so the
/// dataset must be balanced.
pub fn verify_bound_chain(
    ds: &Dataset,
    grid: &[Vec<f64>],
    parzen: &ParzenConfig,
    dd: &DDConfig,
    target: Option<&[f64]>,
) -> Result<BoundChainReport> {
    let pos: Vec<&Bag> = ds.bags.iter().filter(|b| b.label.is_positive()).collect();
    let neg: Vec<&Bag> = ds.bags.iter().filter(|b| !b.label.is_positive()).collect();
    if pos.is_empty() || pos.len() != neg.len() {
        return Err(GmilError::param(format!(
            "bound chain needs a balanced dataset, got {} positive and {} negative bags",
            pos.len(),
            neg.len()
        )));
    }
    if grid.is_empty() {
        return Err(GmilError::param("empty candidate grid"));
    }
    for g in grid {
        if g.len() != ds.dimension {
            return Err(GmilError::DimensionMismatch {
                expected: ds.dimension,
                found: g.len(),
            });
        }
    }

    struct Cand {
        window: bool,
        kernel: bool,
        log_sum: f64,
        log_prod: f64,
        ratio: f64,
        dd: f64,
    }

    let evals: Vec<Cand> = grid
        .par_iter()
        .map(|x| {
            let window = pos
                .iter()
                .zip(&neg)
                .all(|(p, n)| window_count(x, p, parzen) >= window_count(x, n, parzen));
            let lp: Vec<f64> = pos.iter().map(|b| log_bag_probability(x, b, dd)).collect();
            let ln: Vec<f64> = neg.iter().map(|b| log_bag_probability(x, b, dd)).collect();
            let min_pos = lp.iter().copied().fold(f64::INFINITY, f64::min);
            let max_neg = ln.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let finite = lp.iter().chain(&ln).all(|v| v.is_finite());
            let (log_sum, log_prod) = log_ratios(&lp, &ln);
            Cand {
                window,
                kernel: finite && min_pos >= max_neg,
                log_sum,
                log_prod,
                ratio: density_ratio_at(x, ds, parzen),
                dd: dd_objective_at(x, ds, dd),
            }
        })
        .collect();

    let mut report = BoundChainReport {
        candidates: grid.len(),
        window_premise: 0,
        qualifying: 0,
        violations: 0,
        worst_log_slack: f64::INFINITY,
        window_only_failures: 0,
        density_ratio_argmax: argmax(&evals.iter().map(|c| c.ratio).collect::<Vec<_>>()),
        dd_argmax: argmax(&evals.iter().map(|c| c.dd).collect::<Vec<_>>()),
        target_cell: target.map(|t| nearest_index(grid, t)),
        target_qualifies: None,
    };
    for c in &evals {
        if !c.window {
            continue;
        }
        report.window_premise += 1;
        if c.kernel {
            report.qualifying += 1;
            report.violations += usize::from(violates(c.log_sum, c.log_prod));
            report.worst_log_slack = report.worst_log_slack.min(c.log_prod - c.log_sum);
        } else if violates(c.log_sum, c.log_prod) {
            report.window_only_failures += 1;
        }
    }
    report.target_qualifies = report.target_cell.map(|t| evals[t].window && evals[t].kernel);
    Ok(report)
}

/// Settings for the synthetic bound-chain suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundChainSuite {
    pub datasets: usize,
    pub bags_per_class: usize,
    pub instances_per_bag: usize,
    /// Grid cells per axis over the unit square; the Parzen edge equals the cell width.
    pub grid_steps: usize,
    pub noise_sigma: f64,
    pub dd: DDConfig,
    pub seed: u64,
}

impl Default for BoundChainSuite {
    fn default() -> Self {
        BoundChainSuite {
            datasets: 20,
            bags_per_class: 5,
            instances_per_bag: 4,
            grid_steps: 5,
            noise_sigma: 0.01,
            dd: DDConfig { s: 0.1 },
            seed: 0,
        }
    }
}

impl BoundChainSuite {
    /// A balanced 2-D dataset whose target sits on an interior grid cell center.
    pub fn dataset(&self, index: usize) -> Result<(Dataset, Vec<f64>)> {
        let seed = self.seed.wrapping_add(index as u64);
        let step = 1.0 / self.grid_steps as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        let interior = 1..self.grid_steps.saturating_sub(1).max(2);
        let cell = |rng: &mut ChaCha8Rng| (rng.random_range(interior.clone()) as f64 + 0.5) * step;
        let target = vec![cell(&mut rng), cell(&mut rng)];
        let mut spec = SynthSpec::planted(2, self.bags_per_class, self.bags_per_class, self.noise_sigma, seed)?;
        spec.targets = vec![target.clone()];
        spec.negative_modes
            .retain(|m| squared_distance(m, &target).sqrt() > 0.25);
        if spec.negative_modes.is_empty() {
            spec.negative_modes
                .push(target.iter().map(|t| if *t < 0.5 { 0.9 } else { 0.1 }).collect());
        }
        spec.instances_per_bag = (self.instances_per_bag, self.instances_per_bag);
        let (ds, _) = generate(&spec)?;
        Ok((ds, target))
    }

    pub fn run(&self) -> Result<Vec<BoundChainReport>> {
        let grid = grid_points(2, 0.0, 1.0, self.grid_steps);
        let parzen = ParzenConfig {
            h: 1.0 / self.grid_steps as f64,
        };
        (0..self.datasets)
            .map(|i| {
                let (ds, target) = self.dataset(i)?;
                verify_bound_chain(&ds, &grid, &parzen, &self.dd, Some(&target))
            })
            .collect()
    }
}

/// How well the best histogram bin tracks the exact density-ratio maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub best_bin: usize,
    pub best_bin_center: Vec<f64>,
    pub grid_argmax: Vec<f64>,
    /// Whether the bin centroid falls inside the Parzen window of the grid maximum.
    pub agree: bool,
    pub distance: f64,
}

/// Trains bins on `ds` and compares the top-scoring bin's centroid with the
/// grid maximum of the window density ratio. Reported, never asserted.
pub fn compare_histogram_to_parzen(
    ds: &Dataset,
    params: &TrainParams,
    grid: &[Vec<f64>],
    parzen: &ParzenConfig,
) -> Result<ApproxReport> {
    let fitted = FittedBins::fit(ds, params)?;
    let best_bin = argmax(&fitted.scores.scores);
    let center = fitted.clustering.model.centroids[best_bin].clone();
    let ratios: Vec<f64> = grid
        .par_iter()
        .map(|x| density_ratio_at(x, &fitted.prepared, parzen))
        .collect();
    let best = grid[argmax(&ratios)].clone();
    Ok(ApproxReport {
        agree: in_window(&best, &center, parzen.h),
        distance: squared_distance(&best, &center).sqrt(),
        best_bin,
        best_bin_center: center,
        grid_argmax: best,
    })
}

/// Convenience for tests and examples: a bag of one-off points.
pub fn bag_of(id: &str, label: crate::data::Label, pts: &[Vec<f64>]) -> Result<Bag> {
    Bag::new(id, label, pts.iter().cloned().map(Instance).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    #[test]
    fn window_examples() {
        assert_eq!(parzen_window(&[0.0, 0.0, 0.0]), 1);
        assert_eq!(parzen_window(&[0.1, 0.5]), 0);
        assert_eq!(parzen_window(&[-0.5]), 0);
        assert_eq!(parzen_window(&[0.4999, -0.4999]), 1);
    }

    fn toy() -> Dataset {
        Dataset::new(vec![
            bag_of("p1", Label::Positive, &[vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap(),
            bag_of("p2", Label::Positive, &[vec![0.0, 0.0], vec![-5.0, 5.0]]).unwrap(),
            bag_of("n1", Label::Negative, &[vec![5.0, 5.0]]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn density_ratio_examples() {
        let ds = toy();
        let cfg = ParzenConfig { h: 0.2 };
        assert_eq!(density_ratio_at(&[100.0, 100.0], &ds, &cfg), 0.0);
        let r = density_ratio_at(&[0.0, 0.0], &ds, &cfg);
        assert!(r >= 2.0 / ORACLE_EPSILON);
        assert_eq!(window_mass(&[5.0, 5.0], &ds, &cfg), (1, 1));
    }

    #[test]
    fn dd_single_bag_at_instance_is_one() {
        let ds = Dataset::new(vec![bag_of("p", Label::Positive, &[vec![0.3, 0.7]]).unwrap()]).unwrap();
        assert_eq!(dd_objective_at(&[0.3, 0.7], &ds, &DDConfig::default()), 0.0);
    }

    #[test]
    fn dd_far_away_is_hugely_negative() {
        let ds = toy();
        let v = dd_objective_at(&[1e3, 1e3], &ds, &DDConfig::default());
        assert!(v.is_finite());
        assert!(v <= -700.0);
    }

    #[test]
    fn dd_on_negative_instance_is_minus_infinity() {
        let v = dd_objective_at(&[5.0, 5.0], &toy(), &DDConfig::default());
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn theorem1_worked_example() {
        let lp: Vec<f64> = [0.9f64, 0.8].iter().map(|v| v.ln()).collect();
        let ln: Vec<f64> = [0.5f64, 0.4].iter().map(|v| v.ln()).collect();
        let (s, p) = log_ratios(&lp, &ln);
        assert!((s.exp() - 1.7 / 0.9).abs() < 1e-12);
        assert!((p.exp() - 3.6).abs() < 1e-12);
        assert!(!violates(s, p));
    }

    #[test]
    fn theorem1_equal_values_give_equality() {
        let c = 0.37f64.ln();
        let (s, p) = log_ratios(&[c; 5], &[c; 5]);
        assert!(s.abs() < 1e-15 && p.abs() < 1e-15);
        assert!(!violates(s, p));
    }

    #[test]
    fn theorem1_small_run() {
        let r = verify_theorem1(5000, &[2, 3, 7], 1).unwrap();
        assert_eq!(r.trials, 5000);
        assert_eq!(r.near_equality_trials, 500);
        assert!(r.passed());
        assert!(verify_theorem1(0, &[2], 1).is_err());
        assert!(verify_theorem1(10, &[0], 1).is_err());
    }

    #[test]
    fn grid_covers_the_square() {
        let g = grid_points(2, 0.0, 1.0, 4);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], vec![0.125, 0.125]);
        assert_eq!(g[15], vec![0.875, 0.875]);
    }

    #[test]
    fn bound_chain_requires_balance() {
        let grid = grid_points(2, 0.0, 1.0, 2);
        assert!(verify_bound_chain(&toy(), &grid, &ParzenConfig::default(), &DDConfig::default(), None).is_err());
    }
}
