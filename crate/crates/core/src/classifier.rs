//! Nearest-codebook voting.
//!
//! A bag's distance to a codebook is the minimal Hausdorff distance: the
//! smallest Euclidean distance over all (instance, center) pairs. Unlike the
//! classical max-min Hausdorff distance, irrelevant instances in a bag never
//! push it away from a codebook.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::squared_distance;
use crate::codebook::Codebook;
use crate::data::{Bag, Label};
use crate::error::{GmilError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Distance to the positive codebook.
    pub d_pos: f64,
    /// Distance to the negative codebook; absent in the threshold regime.
    pub d_neg: Option<f64>,
    /// `d_neg - d_pos`, or `tau - d_pos` in the threshold regime. Positive iff the label is.
    pub margin: f64,
}

/// `min ||a - b||` over `a` in `xs`, `b` in `ys`.
pub fn min_hausdorff<A: AsRef<[f64]>, B: AsRef<[f64]>>(xs: &[A], ys: &[B]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(GmilError::Empty("minimal Hausdorff distance of an empty set".into()));
    }
    let d = xs[0].as_ref().len();
    let mut best = f64::INFINITY;
    for x in xs {
        let x = x.as_ref();
        if x.len() != d {
            return Err(GmilError::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        for y in ys {
            let y = y.as_ref();
            if y.len() != d {
                return Err(GmilError::DimensionMismatch {
                    expected: d,
                    found: y.len(),
                });
            }
            best = best.min(squared_distance(x, y));
        }
    }
    Ok(best.sqrt())
}

/// Labels a bag given in the codebook's raw input space.
///
/// With negative centers the bag is positive iff it is strictly closer to the
/// positive codebook; otherwise it is positive iff its distance to the
/// targets is strictly below `tau`. Exact ties are negative.
pub fn classify(bag: &Bag, cb: &Codebook) -> Result<Prediction> {
    if bag.dim() != cb.dimension {
        return Err(GmilError::DimensionMismatch {
            expected: cb.dimension,
            found: bag.dim(),
        });
    }
    let prepared: Vec<Vec<f64>> = bag.instances.iter().map(|x| cb.preprocessing.apply_point(x)).collect();
    classify_prepared(&prepared, cb)
}

/// Same as [`classify`] for instances that already went through the
/// codebook's preprocessing.
pub fn classify_prepared<P: AsRef<[f64]>>(instances: &[P], cb: &Codebook) -> Result<Prediction> {
    let d_pos = min_hausdorff(instances, &cb.positive_centers)?;
    if cb.negative_centers.is_empty() {
        let tau = cb
            .tau
            .ok_or_else(|| GmilError::CorruptModel("threshold regime without tau".into()))?;
        let margin = tau - d_pos;
        return Ok(Prediction {
            label: if d_pos < tau { Label::Positive } else { Label::Negative },
            d_pos,
            d_neg: None,
            margin,
        });
    }
    let d_neg = min_hausdorff(instances, &cb.negative_centers)?;
    Ok(Prediction {
        label: if d_pos < d_neg {
            Label::Positive
        } else {
            Label::Negative
        },
        d_pos,
        d_neg: Some(d_neg),
        margin: d_neg - d_pos,
    })
}

/// Classifies every bag in parallel; output order follows input order. The
/// first failing bag aborts the batch and is reported by index.
pub fn classify_batch(bags: &[Bag], cb: &Codebook) -> Result<Vec<Prediction>> {
    let results: Vec<Result<Prediction>> = bags.par_iter().map(|b| classify(b, cb)).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| GmilError::Bag {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
