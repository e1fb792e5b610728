//! Codebook learning.
//!
//! All training instances are clustered into `K` bins. Each bin is counted
//! separately for positive and negative bags, the counts are normalized into
//! two histograms, and every bin is scored by
//!
//! ```text
//! score(k) = h+(k) / (h-(k) + eps) * sigmoid((bin+(k) - n/K) / (n/K))
//! ```
//!
//! where `n` is the number of positive bags. The `p` best-scoring bins become
//! the positive (target) codebook; the `q` bins holding the most negative mass
//! become the negative codebook. With `q = 0` a distance threshold `tau` is
//! learned instead.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::min_hausdorff;
use crate::clustering::{cluster_subsampled, Assignment, ClusterModel, Clustering, LloydConfig};
use crate::data::{
    apply_transform, fit_normalizer, fit_pca, Bag, Dataset, NormalizationMode, Normalizer, PcaTransform, Transform,
};
use crate::error::{GmilError, Result};

pub const CODEBOOK_VERSION: &str = "gmil-codebook/1";

/// Per-bin instance counts for positive and negative bags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCounts {
    pub positive: Vec<u64>,
    pub negative: Vec<u64>,
    pub n_pos_bags: usize,
    pub n_neg_bags: usize,
}

impl BinCounts {
    pub fn k(&self) -> usize {
        self.positive.len()
    }

    pub fn total_positive(&self) -> u64 {
        self.positive.iter().sum()
    }

    pub fn total_negative(&self) -> u64 {
        self.negative.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinScores {
    pub scores: Vec<f64>,
    pub epsilon: f64,
}

/// Counts, per cluster, the instances of positive and of negative bags.
///
/// `asn` indexes the instances of `ds` flattened in bag order.
pub fn count_bins(ds: &Dataset, asn: &Assignment, k: usize) -> Result<BinCounts> {
    if asn.len() != ds.n_instances() {
        return Err(GmilError::param(format!(
            "assignment covers {} instances, dataset has {}",
            asn.len(),
            ds.n_instances()
        )));
    }
    let mut positive = vec![0u64; k];
    let mut negative = vec![0u64; k];
    let mut cursor = asn.as_slice().iter();
    for bag in &ds.bags {
        let bins = if bag.label.is_positive() {
            &mut positive
        } else {
            &mut negative
        };
        for &c in cursor.by_ref().take(bag.len()) {
            let slot = bins
                .get_mut(c)
                .ok_or_else(|| GmilError::param(format!("cluster index {c} out of range for K = {k}")))?;
            *slot += 1;
        }
    }
    Ok(BinCounts {
        positive,
        negative,
        n_pos_bags: ds.n_positive(),
        n_neg_bags: ds.n_negative(),
    })
}

/// Divides each side by its total count.
pub fn normalize(counts: &BinCounts) -> Result<Histograms> {
    let tp = counts.total_positive();
    let tn = counts.total_negative();
    if tp == 0 {
        return Err(GmilError::Empty("no positive instances to histogram".into()));
    }
    if tn == 0 {
        return Err(GmilError::Empty("no negative instances to histogram".into()));
    }
    let norm = |v: &[u64], t: u64| v.iter().map(|&c| c as f64 / t as f64).collect();
    Ok(Histograms {
        positive: norm(&counts.positive, tp),
        negative: norm(&counts.negative, tn),
    })
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Sigmoid-weighted histogram ratio per bin.
pub fn score_bins(counts: &BinCounts, h: &Histograms, epsilon: f64) -> Result<BinScores> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(GmilError::param(format!("epsilon must be positive, got {epsilon}")));
    }
    let k = counts.k();
    if k == 0 {
        return Err(GmilError::param("K must be at least 1"));
    }
    if counts.n_pos_bags == 0 {
        return Err(GmilError::Empty("score needs at least one positive bag".into()));
    }
    if h.positive.len() != k || h.negative.len() != k {
        return Err(GmilError::DimensionMismatch {
            expected: k,
            found: h.positive.len().min(h.negative.len()),
        });
    }
    let expected = counts.n_pos_bags as f64 / k as f64;
    let scores = (0..k)
        .map(|b| {
            let ratio = h.positive[b] / (h.negative[b] + epsilon);
            ratio * sigmoid((counts.positive[b] as f64 - expected) / expected)
        })
        .collect();
    Ok(BinScores { scores, epsilon })
}

/// Bin indices sorted by descending value, ties by ascending index.
fn ranked(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Which bins were picked for each codebook, and their centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub positive_bins: Vec<usize>,
    pub negative_bins: Vec<usize>,
    pub positive_centers: Vec<Vec<f64>>,
    pub negative_centers: Vec<Vec<f64>>,
}

/// Greedy selection: the `p` top-scoring bins and the `q` bins with the
/// largest negative histogram mass. The two lists may share a bin.
pub fn select_codebook(
    model: &ClusterModel,
    scores: &BinScores,
    h_neg: &[f64],
    p: usize,
    q: usize,
) -> Result<Selection> {
    let k = model.k();
    if p == 0 {
        return Err(GmilError::param("p must be at least 1"));
    }
    if p > k || q > k {
        return Err(GmilError::param(format!("p = {p} and q = {q} must not exceed K = {k}")));
    }
    if scores.scores.len() != k || h_neg.len() != k {
        return Err(GmilError::DimensionMismatch {
            expected: k,
            found: scores.scores.len().min(h_neg.len()),
        });
    }
    let positive_bins: Vec<usize> = ranked(&scores.scores).into_iter().take(p).collect();
    let negative_bins: Vec<usize> = ranked(h_neg).into_iter().take(q).collect();
    let centers = |bins: &[usize]| bins.iter().map(|&b| model.centroids[b].clone()).collect();
    Ok(Selection {
        positive_centers: centers(&positive_bins),
        negative_centers: centers(&negative_bins),
        positive_bins,
        negative_bins,
    })
}

/// Mean, over the positive bags of `ds`, of the minimal distance between the
/// bag and the target centers.
pub fn compute_tau(ds: &Dataset, targets: &[Vec<f64>]) -> Result<f64> {
    let positives: Vec<&Bag> = ds.bags.iter().filter(|b| b.label.is_positive()).collect();
    if positives.is_empty() {
        return Err(GmilError::Empty("tau needs at least one positive bag".into()));
    }
    mean_distance(positives.into_iter(), targets)
}

/// Mean, over every bag of `ds`, of the minimal distance between the bag
/// and the target centers.
pub fn mean_bag_distance(ds: &Dataset, targets: &[Vec<f64>]) -> Result<f64> {
    if ds.is_empty() {
        return Err(GmilError::Empty("no bags".into()));
    }
    mean_distance(ds.bags.iter(), targets)
}

// Summed in sorted order so the result does not depend on bag order.
fn mean_distance<'a>(bags: impl Iterator<Item = &'a Bag>, targets: &[Vec<f64>]) -> Result<f64> {
    let mut d = bags
        .map(|b| min_hausdorff(&b.instances, targets))
        .collect::<Result<Vec<f64>>>()?;
    d.sort_by(f64::total_cmp);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// How the single-target threshold is obtained when `q = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum TauMode {
    /// Mean distance from every training bag to the targets.
    #[default]
    AllBags,
    /// Mean distance from the positive training bags only ([`compute_tau`]).
    PositiveBags,
    Fixed(f64),
}

impl TauMode {
    pub fn resolve(self, ds: &Dataset, targets: &[Vec<f64>]) -> Result<f64> {
        match self {
            TauMode::AllBags => mean_bag_distance(ds, targets),
            TauMode::PositiveBags => compute_tau(ds, targets),
            TauMode::Fixed(t) => Ok(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub clusters: usize,
    pub epsilon: f64,
    pub pos_centers: usize,
    pub neg_centers: usize,
    pub seed: u64,
    /// Cluster a uniform sample of this many instances when the training set is larger.
    pub sample_cap: Option<usize>,
    pub normalization: NormalizationMode,
    pub pca: Option<usize>,
    pub tau: TauMode,
    pub lloyd: LloydConfig,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            clusters: 10,
            epsilon: 1e-4,
            pos_centers: 1,
            neg_centers: 0,
            seed: 0,
            sample_cap: None,
            normalization: NormalizationMode::MinMax,
            pca: None,
            tau: TauMode::AllBags,
            lloyd: LloydConfig::default(),
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let k = self.clusters;
        if k == 0 {
            return Err(GmilError::param("K must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(GmilError::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.pos_centers == 0 {
            return Err(GmilError::param("p must be at least 1"));
        }
        if self.pos_centers + self.neg_centers > k {
            return Err(GmilError::param(format!(
                "p + q = {} + {} must not exceed K = {k}",
                self.pos_centers, self.neg_centers
            )));
        }
        if let Some(cap) = self.sample_cap {
            if cap < k {
                return Err(GmilError::param(format!("sample cap {cap} is smaller than K = {k}")));
            }
        }
        if let TauMode::Fixed(t) = self.tau {
            if !(t.is_finite() && t >= 0.0) {
                return Err(GmilError::param(format!("tau must be a non-negative number, got {t}")));
            }
        }
        if self.pca == Some(0) {
            return Err(GmilError::param("PCA dimension must be at least 1"));
        }
        Ok(())
    }
}

/// Feature transforms fitted on the training bags, replayed on new bags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub normalizer: Normalizer,
    pub pca: Option<PcaTransform>,
}

impl Preprocessing {
    pub fn fit(ds: &Dataset, mode: NormalizationMode, pca: Option<usize>) -> Result<Self> {
        let normalizer = fit_normalizer(ds, mode);
        let pca = match pca {
            Some(r) => {
                let scaled = apply_transform(ds, &normalizer)?;
                Some(fit_pca(&scaled, r)?)
            }
            None => None,
        };
        Ok(Preprocessing { normalizer, pca })
    }

    pub fn input_dim(&self) -> usize {
        self.normalizer.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.pca
            .as_ref()
            .map_or(self.normalizer.output_dim(), |p| p.output_dim())
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        let scaled = self.normalizer.apply(x);
        match &self.pca {
            Some(p) => p.apply(&scaled),
            None => scaled,
        }
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        let scaled = apply_transform(ds, &self.normalizer)?;
        match &self.pca {
            Some(p) => apply_transform(&scaled, p),
            None => Ok(scaled),
        }
    }
}

/// A trained model: positive and negative centers plus everything needed
/// to replay preprocessing on new bags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub version: String,
    /// Raw input dimension.
    pub dimension: usize,
    pub params: TrainParams,
    pub preprocessing: Preprocessing,
    pub clusters: ClusterModel,
    pub positive_bins: Vec<usize>,
    pub negative_bins: Vec<usize>,
    pub positive_centers: Vec<Vec<f64>>,
    pub negative_centers: Vec<Vec<f64>>,
    pub tau: Option<f64>,
}

impl Codebook {
    pub fn p(&self) -> usize {
        self.positive_centers.len()
    }

    pub fn q(&self) -> usize {
        self.negative_centers.len()
    }

    /// Structural checks applied to any codebook read from disk.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GmilError::CorruptModel(m));
        if self.version != CODEBOOK_VERSION {
            return bad(format!("unsupported version `{}`", self.version));
        }
        if self.positive_centers.is_empty() {
            return bad("no positive centers".into());
        }
        if self.p() + self.q() > self.clusters.k() {
            return bad("more centers than clusters".into());
        }
        if self.preprocessing.input_dim() != self.dimension {
            return bad("preprocessing does not match the input dimension".into());
        }
        let d = self.preprocessing.output_dim();
        let centers = self.positive_centers.iter().chain(&self.negative_centers);
        if centers
            .clone()
            .any(|c| c.len() != d || c.iter().any(|v| !v.is_finite()))
        {
            return bad("center of wrong dimension or non-finite".into());
        }
        match (self.q(), self.tau) {
            (0, None) => bad("threshold regime without tau".into()),
            (q, Some(_)) if q > 0 => bad("tau present alongside negative centers".into()),
            (_, Some(t)) if !t.is_finite() => bad("non-finite tau".into()),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cb: Codebook = serde_json::from_str(text).map_err(|e| GmilError::CorruptModel(e.to_string()))?;
        cb.validate()?;
        Ok(cb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| GmilError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GmilError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Everything up to and including bin scoring. Codebooks for several
/// `(p, q)` pairs can be cut from one fit without re-clustering.
#[derive(Debug, Clone)]
pub struct FittedBins {
    pub params: TrainParams,
    pub preprocessing: Preprocessing,
    /// Training bags after preprocessing.
    pub prepared: Dataset,
    pub clustering: Clustering,
    pub counts: BinCounts,
    pub histograms: Histograms,
    pub scores: BinScores,
}

impl FittedBins {
    pub fn fit(ds: &Dataset, params: &TrainParams) -> Result<Self> {
        params.validate()?;
        ds.require_both_classes()?;
        let preprocessing = Preprocessing::fit(ds, params.normalization, params.pca)?;
        let prepared = preprocessing.apply_dataset(ds)?;
        let points: Vec<&[f64]> = prepared.instances().map(|x| x.as_ref()).collect();
        let cap = params.sample_cap.unwrap_or(usize::MAX);
        let clustering = cluster_subsampled(&points, params.clusters, cap, params.seed, &params.lloyd)?;
        let counts = count_bins(&prepared, &clustering.assignment, params.clusters)?;
        let histograms = normalize(&counts)?;
        let scores = score_bins(&counts, &histograms, params.epsilon)?;
        Ok(FittedBins {
            params: params.clone(),
            preprocessing,
            prepared,
            clustering,
            counts,
            histograms,
            scores,
        })
    }

    /// Selects `p` positive and `q` negative centers; with `q = 0` the
    /// threshold is resolved from `tau`.
    pub fn codebook(&self, p: usize, q: usize, tau_mode: TauMode) -> Result<Codebook> {
        let mut params = self.params.clone();
        params.pos_centers = p;
        params.neg_centers = q;
        params.tau = tau_mode;
        params.validate()?;
        let sel = select_codebook(&self.clustering.model, &self.scores, &self.histograms.negative, p, q)?;
        let tau = if q == 0 {
            Some(tau_mode.resolve(&self.prepared, &sel.positive_centers)?)
        } else {
            None
        };
        Ok(Codebook {
            version: CODEBOOK_VERSION.to_string(),
            dimension: self.preprocessing.input_dim(),
            params,
            preprocessing: self.preprocessing.clone(),
            clusters: self.clustering.model.clone(),
            positive_bins: sel.positive_bins,
            negative_bins: sel.negative_bins,
            positive_centers: sel.positive_centers,
            negative_centers: sel.negative_centers,
            tau,
        })
    }
}

/// Cluster, count, score and select in one call.
pub fn train(ds: &Dataset, params: &TrainParams) -> Result<Codebook> {
    let fitted = FittedBins::fit(ds, params)?;
    fitted.codebook(params.pos_centers, params.neg_centers, params.tau)
}
