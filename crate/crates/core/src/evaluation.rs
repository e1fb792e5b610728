//! Cross-validation, one-vs-all evaluation and the scaling benchmark.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::classify_batch;
use crate::codebook::{FittedBins, TrainParams};
use crate::data::{Dataset, Label, MulticlassDataset};
use crate::error::{GmilError, Result};
use crate::synth::{generate, SynthSpec};

/// A stratified partition of a dataset's bags into `k` test folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Bag indices held out by each fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// The same folds as bag ids.
    pub bag_ids: Vec<Vec<String>>,
}

impl FoldPlan {
    /// Shuffles each class separately and deals bags round-robin, continuing
    /// the rotation from positives into negatives so fold sizes differ by at
    /// most one. Every training portion keeps both classes.
    pub fn stratified(ds: &Dataset, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(GmilError::param(format!("need at least 2 folds, got {k}")));
        }
        if k > ds.len() {
            return Err(GmilError::param(format!("{k} folds for {} bags", ds.len())));
        }
        if ds.n_positive() < 2 || ds.n_negative() < 2 {
            return Err(GmilError::param(format!(
                "stratified folds need at least 2 bags per class, got {} positive and {} negative",
                ds.n_positive(),
                ds.n_negative()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.bags[i].label.is_positive()).collect();
        let mut neg: Vec<usize> = (0..ds.len()).filter(|&i| !ds.bags[i].label.is_positive()).collect();
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let mut folds = vec![Vec::new(); k];
        for (slot, i) in pos.into_iter().chain(neg).enumerate() {
            folds[slot % k].push(i);
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        let bag_ids = folds
            .iter()
            .map(|f| f.iter().map(|&i| ds.bags[i].id.clone()).collect())
            .collect();
        Ok(FoldPlan {
            k,
            seed,
            folds,
            bag_ids,
        })
    }

    /// Bag indices used for training when fold `i` is held out.
    pub fn train_indices(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub train_seconds: f64,
    pub test_seconds: f64,
    /// Predicted label per held-out bag, in the fold's bag order.
    pub predictions: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub params: TrainParams,
    pub k_folds: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
}

impl EvalReport {
    fn assemble(params: TrainParams, plan: &FoldPlan, folds: Vec<FoldResult>) -> Self {
        let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64;
        EvalReport {
            params,
            k_folds: plan.k,
            seed: plan.seed,
            folds,
            mean_accuracy,
        }
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for f in &mut r.folds {
            f.train_seconds = 0.0;
            f.test_seconds = 0.0;
        }
        r
    }

    pub fn total_seconds(&self) -> f64 {
        self.folds.iter().map(|f| f.train_seconds + f.test_seconds).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per fold plus the mean.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for f in &self.folds {
            let c = f.confusion;
            s.push_str(&format!(
                "fold {:>2}  acc {:.4}  tp {} fp {} tn {} fn {}  train {:.3}s  test {:.3}s\n",
                f.fold, f.accuracy, c.tp, c.fp, c.tn, c.fn_, f.train_seconds, f.test_seconds
            ));
        }
        s.push_str(&format!("mean accuracy {:.4}\n", self.mean_accuracy));
        s
    }
}

/// k-fold cross-validation. `seed` fixes the fold assignment; clustering
/// uses `params.seed`. Preprocessing is fitted on each training portion only.
pub fn cross_validate(ds: &Dataset, params: &TrainParams, k: usize, seed: u64) -> Result<EvalReport> {
    let mut reports = cross_validate_grid(ds, params, k, seed, &[(params.pos_centers, params.neg_centers)])?;
    Ok(reports.remove(0))
}

/// Cross-validates several `(p, q)` pairs at once. Each fold is clustered
/// once and every pair is cut from the same bins, so the reports differ only
/// in center selection. Per-fold training time covers the shared fit plus
/// that pair's selection.
pub fn cross_validate_grid(
    ds: &Dataset,
    params: &TrainParams,
    k: usize,
    seed: u64,
    pairs: &[(usize, usize)],
) -> Result<Vec<EvalReport>> {
    params.validate()?;
    if pairs.is_empty() {
        return Err(GmilError::param("no (p, q) pairs to evaluate"));
    }
    for &(p, q) in pairs {
        let mut pq = params.clone();
        pq.pos_centers = p;
        pq.neg_centers = q;
        pq.validate()?;
    }
    let plan = FoldPlan::stratified(ds, k, seed)?;
    let per_fold: Vec<Vec<FoldResult>> = (0..k)
        .into_par_iter()
        .map(|i| run_fold(ds, params, &plan, i, pairs))
        .collect::<Result<_>>()?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(j, &(p, q))| {
            let mut pq = params.clone();
            pq.pos_centers = p;
            pq.neg_centers = q;
            let folds = per_fold.iter().map(|f| f[j].clone()).collect();
            EvalReport::assemble(pq, &plan, folds)
        })
        .collect())
}

fn run_fold(
    ds: &Dataset,
    params: &TrainParams,
    plan: &FoldPlan,
    i: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<FoldResult>> {
    let train = ds.subset(&plan.train_indices(i));
    let test = ds.subset(&plan.folds[i]);
    let start = Instant::now();
    let fitted = FittedBins::fit(&train, params)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    pairs
        .iter()
        .map(|&(p, q)| {
            let start = Instant::now();
            let cb = fitted.codebook(p, q, params.tau)?;
            let train_seconds = fit_seconds + start.elapsed().as_secs_f64();
            let start = Instant::now();
            let preds = classify_batch(&test.bags, &cb)?;
            let test_seconds = start.elapsed().as_secs_f64();
            let mut confusion = Confusion::default();
            for (bag, pred) in test.bags.iter().zip(&preds) {
                confusion.record(bag.label, pred.label);
            }
            Ok(FoldResult {
                fold: i,
                accuracy: confusion.accuracy(),
                confusion,
                train_seconds,
                test_seconds,
                predictions: preds.iter().map(|p| p.label).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAllReport {
    pub classes: Vec<ClassReport>,
    /// Mean of the per-class mean accuracies.
    pub mean_accuracy: f64,
}

/// One binary cross-validation per class (that class positive, the rest negative).
pub fn one_vs_all(ds: &MulticlassDataset, params: &TrainParams, k: usize, seed: u64) -> Result<OneVsAllReport> {
    let classes = ds.classes();
    if classes.len() < 2 {
        return Err(GmilError::param(format!(
            "one-vs-all needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    let classes = classes
        .into_iter()
        .map(|class| {
            let binary = ds.one_vs_rest(&class)?;
            let report = cross_validate(&binary, params, k, seed)?;
            Ok(ClassReport { class, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_accuracy = classes.iter().map(|c| c.report.mean_accuracy).sum::<f64>() / classes.len() as f64;
    Ok(OneVsAllReport { classes, mean_accuracy })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub instances: usize,
    pub bags: usize,
    /// Fastest of the repeated training runs.
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln(seconds)` on `ln(instances)`; absent for a single size.
    pub slope: Option<f64>,
}

impl ScalingReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "instances,bags,train_seconds")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.instances, r.bags, r.train_seconds)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Trains once per size on synthetic data drawn from `template` and reports
/// the training time. Sizes count instances; the template's bag size range
/// sets how many bags that takes (split evenly between the classes). Each
/// size is timed `repeats` times and the fastest run kept.
pub fn bench_scaling(
    template: &SynthSpec,
    sizes: &[usize],
    params: &TrainParams,
    repeats: usize,
) -> Result<ScalingReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GmilError::param("sizes must be non-empty and strictly ascending"));
    }
    let repeats = repeats.max(1);
    let (lo, hi) = template.instances_per_bag;
    let mean_size = (lo + hi) as f64 / 2.0;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let bags = ((n as f64 / mean_size).ceil() as usize).max(2);
        let mut spec = template.clone();
        spec.n_pos = bags.div_ceil(2);
        spec.n_neg = bags / 2;
        let (ds, _) = generate(&spec)?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            let start = Instant::now();
            let fitted = FittedBins::fit(&ds, params)?;
            fitted.codebook(params.pos_centers, params.neg_centers, params.tau)?;
            best = best.min(start.elapsed().as_secs_f64());
        }
        rows.push(ScalingRow {
            instances: ds.n_instances(),
            bags,
            train_seconds: best,
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.instances as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.train_seconds.ln()).collect();
    Ok(ScalingReport {
        slope: fit_slope(&lx, &ly),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Bag, Instance};

    fn toy(n_pos: usize, n_neg: usize) -> Dataset {
        let mut bags = Vec::new();
        for i in 0..n_pos {
            bags.push(Bag::new(format!("p{i}"), Label::Positive, vec![Instance(vec![0.0, i as f64])]).unwrap());
        }
        for i in 0..n_neg {
            bags.push(Bag::new(format!("n{i}"), Label::Negative, vec![Instance(vec![5.0, i as f64])]).unwrap());
        }
        Dataset::new(bags).unwrap()
    }

    #[test]
    fn leave_one_bag_out() {
        let plan = FoldPlan::stratified(&toy(2, 2), 4, 0).unwrap();
        assert_eq!(plan.folds.len(), 4);
        assert!(plan.folds.iter().all(|f| f.len() == 1));
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn folds_partition_and_stratify() {
        let ds = toy(23, 31);
        let plan = FoldPlan::stratified(&ds, 10, 9).unwrap();
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..54).collect::<Vec<_>>());
        for (i, f) in plan.folds.iter().enumerate() {
            assert!(f.len() == 5 || f.len() == 6);
            let pos = f.iter().filter(|&&j| ds.bags[j].label.is_positive()).count();
            assert!(pos == 2 || pos == 3, "fold {i} has {pos} positives");
            assert_eq!(plan.train_indices(i).len(), 54 - f.len());
        }
    }

    #[test]
    fn fold_errors() {
        assert!(FoldPlan::stratified(&toy(2, 2), 5, 0).is_err());
        assert!(FoldPlan::stratified(&toy(2, 2), 1, 0).is_err());
        assert!(FoldPlan::stratified(&toy(1, 5), 3, 0).is_err());
    }

    #[test]
    fn confusion_counts() {
        let mut c = Confusion::default();
        c.record(Label::Positive, Label::Positive);
        c.record(Label::Positive, Label::Negative);
        c.record(Label::Negative, Label::Negative);
        c.record(Label::Negative, Label::Negative);
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 0,
                tn: 2,
                fn_: 1
            }
        );
        assert_eq!(c.accuracy(), 0.75);
    }

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0];
        assert!((fit_slope(&x, &[3.0, 5.0, 7.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn separable_toy_cv() {
        let params = TrainParams {
            clusters: 2,
            normalization: crate::data::NormalizationMode::None,
            ..TrainParams::default()
        };
        let r = cross_validate(&toy(6, 6), &params, 3, 1).unwrap();
        assert_eq!(r.folds.len(), 3);
        assert!(r.folds.iter().all(|f| f.confusion.total() == 4));
        let mean = r.folds.iter().map(|f| f.accuracy).sum::<f64>() / 3.0;
        assert_eq!(r.mean_accuracy, mean);
    }
}
