//! Multiple-instance learning by codebook learning and nearest-neighbor voting.
//!
//! Training clusters every instance of every bag into `K` bins, scores each
//! bin by how much more often positive bags land in it than negative bags,
//! and keeps the best `p` bins as positive centers (plus, optionally, the `q`
//! most negative bins). A new bag is labeled by its minimal Hausdorff distance
//! to those centers.
//!
//! ```no_run
//! use gmil::{classify, load_csv, train, CsvSchema, TrainParams};
//!
//! let ds = load_csv("data/musk1.csv", &CsvSchema::default())?;
//! let params = TrainParams { clusters: 10, pos_centers: 2, ..TrainParams::default() };
//! let codebook = train(&ds, &params)?;
//! let prediction = classify(&ds.bags[0], &codebook)?;
//! println!("{} d_pos={}", prediction.label, prediction.d_pos);
//! # Ok::<(), gmil::GmilError>(())
//! ```
//!
//! The `examples/` directory has one runnable program per capability.

pub mod classifier;
pub mod cli;
pub mod clustering;
pub mod codebook;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod oracle;
pub mod synth;

pub use classifier::{classify, classify_batch, min_hausdorff, Prediction};
pub use clustering::{assign, cluster_subsampled, kmeans_pp_init, lloyd, ClusterModel, LloydConfig};
pub use codebook::{train, Codebook, FittedBins, TauMode, TrainParams};
pub use data::{load_csv, Bag, CsvSchema, Dataset, Instance, Label, NormalizationMode};
pub use error::{GmilError, Result};
pub use evaluation::{cross_validate, one_vs_all, EvalReport, FoldPlan};
pub use synth::{generate, SynthSpec};
