//! Bags, instances and datasets, plus CSV ingestion and the feature
//! transforms (min-max / z-score scaling, PCA) fitted on training data.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Deref;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GmilError, Result};

/// Binary bag label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// `1` for positive, `0` for negative.
    pub fn as_digit(self) -> u8 {
        match self {
            Label::Positive => 1,
            Label::Negative => 0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_digit())
    }
}

impl FromStr for Label {
    type Err = String;

    /// Accepts `1`/`0`, `+1`/`-1` and their C4.5-style float spellings (`1.`, `0.0`).
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        match t.parse::<f64>() {
            Ok(1.0) => Ok(Label::Positive),
            Ok(v) if v == 0.0 || v == -1.0 => Ok(Label::Negative),
            _ => Err(format!("unparseable label `{t}`")),
        }
    }
}

/// One feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(pub Vec<f64>);

impl Instance {
    pub fn new(features: Vec<f64>) -> Self {
        Instance(features)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Instance {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Instance {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Instance {
    fn from(v: Vec<f64>) -> Self {
        Instance(v)
    }
}

/// A labeled, non-empty set of instances sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub id: String,
    pub label: Label,
    pub instances: Vec<Instance>,
}

impl Bag {
    pub fn new(id: impl Into<String>, label: Label, instances: Vec<Instance>) -> Result<Self> {
        let id = id.into();
        let first = instances
            .first()
            .ok_or_else(|| GmilError::Empty(format!("bag `{id}` has no instances")))?;
        let d = first.dim();
        for inst in &instances {
            if inst.dim() != d {
                return Err(GmilError::DimensionMismatch {
                    expected: d,
                    found: inst.dim(),
                });
            }
            if !inst.is_finite() {
                return Err(GmilError::NonFinite { bag: id });
            }
        }
        Ok(Bag { id, label, instances })
    }

    pub fn dim(&self) -> usize {
        self.instances[0].dim()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// A collection of bags with a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dimension: usize,
    pub bags: Vec<Bag>,
}

impl Dataset {
    /// Validates that every bag is non-empty, finite and of the same dimension.
    pub fn new(bags: Vec<Bag>) -> Result<Self> {
        let first = bags
            .first()
            .ok_or_else(|| GmilError::Empty("dataset has no bags".into()))?;
        let dimension = first.dim();
        for bag in &bags {
            if bag.instances.is_empty() {
                return Err(GmilError::Empty(format!("bag `{}` has no instances", bag.id)));
            }
            for inst in &bag.instances {
                if inst.dim() != dimension {
                    return Err(GmilError::DimensionMismatch {
                        expected: dimension,
                        found: inst.dim(),
                    });
                }
                if !inst.is_finite() {
                    return Err(GmilError::NonFinite { bag: bag.id.clone() });
                }
            }
        }
        Ok(Dataset { dimension, bags })
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.bags.iter().filter(|b| b.label.is_positive()).count()
    }

    pub fn n_negative(&self) -> usize {
        self.len() - self.n_positive()
    }

    pub fn n_instances(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    /// All instances in bag order, flattened.
    pub fn instances(&self) -> impl Iterator<Item = &Instance> + '_ {
        self.bags.iter().flat_map(|b| b.instances.iter())
    }

    /// Label of the owning bag, per flattened instance.
    pub fn instance_labels(&self) -> Vec<Label> {
        self.bags
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.label, b.len()))
            .collect()
    }

    /// Training requires both classes.
    pub fn require_both_classes(&self) -> Result<()> {
        if self.n_positive() == 0 {
            return Err(GmilError::Empty("no positive bags".into()));
        }
        if self.n_negative() == 0 {
            return Err(GmilError::Empty("no negative bags".into()));
        }
        Ok(())
    }

    /// New dataset holding clones of the bags at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dimension: self.dimension,
            bags: indices.iter().map(|&i| self.bags[i].clone()).collect(),
        }
    }
}

/// Multiclass variant used by the one-vs-all evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassBag {
    pub id: String,
    pub class: String,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassDataset {
    pub dimension: usize,
    pub bags: Vec<MulticlassBag>,
}

impl MulticlassDataset {
    /// Class names in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for b in &self.bags {
            if !seen.contains(&b.class) {
                seen.push(b.class.clone());
            }
        }
        seen
    }

    /// Relabels `class` as positive and every other class as negative.
    pub fn one_vs_rest(&self, class: &str) -> Result<Dataset> {
        let bags = self
            .bags
            .iter()
            .map(|b| {
                let label = if b.class == class {
                    Label::Positive
                } else {
                    Label::Negative
                };
                Bag::new(b.id.clone(), label, b.instances.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(bags)
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column layout of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvLayout {
    /// `bag_id,label,f1,...,fd`
    #[default]
    Native,
    /// MUSK distribution layout: `molecule,conformation,f1,...,fd,class`.
    C45,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Treat the first row as a header when its label field does not parse.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvSchema {
    pub layout: CsvLayout,
    pub header: HeaderMode,
}

impl CsvSchema {
    pub fn c45() -> Self {
        CsvSchema {
            layout: CsvLayout::C45,
            header: HeaderMode::Absent,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GmilError::io(path, e))?;
    read_csv(file, path, schema)
}

/// Parses bags from any reader; `source` is only used in error messages.
pub fn read_csv<R: Read>(reader: R, source: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(reader);

    let parse_err = |line: usize, message: String| GmilError::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Label, Vec<Instance>)> = HashMap::new();
    let mut dimension: Option<usize> = None;

    for (row, record) in rdr.records().enumerate() {
        let line = row + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() < 3 {
            return Err(parse_err(
                line,
                format!("expected at least 3 columns, found {}", record.len()),
            ));
        }
        let (id, label_field, feature_fields): (&str, &str, Vec<&str>) = match schema.layout {
            CsvLayout::Native => (&record[0], &record[1], record.iter().skip(2).collect()),
            CsvLayout::C45 => {
                let n = record.len();
                if n < 4 {
                    return Err(parse_err(
                        line,
                        "C4.5 rows need name, conformation, features, class".into(),
                    ));
                }
                let feats = record.iter().skip(2).take(n - 3).collect();
                (&record[0], &record[n - 1], feats)
            }
        };

        let label = match label_field.parse::<Label>() {
            Ok(l) => l,
            Err(msg) => {
                let header_allowed = row == 0 && schema.header != HeaderMode::Absent;
                if header_allowed {
                    continue;
                }
                return Err(parse_err(line, msg));
            }
        };
        if row == 0 && schema.header == HeaderMode::Present {
            continue;
        }

        let features = feature_fields
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("feature {} `{f}` is not a finite number", k + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;

        match dimension {
            None => dimension = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(parse_err(
                    line,
                    format!("dimension mismatch: expected {d} features, found {}", features.len()),
                ))
            }
            _ => {}
        }

        let entry = groups.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            (label, Vec::new())
        });
        if entry.0 != label {
            return Err(parse_err(line, format!("bag `{id}` has conflicting labels")));
        }
        entry.1.push(Instance(features));
    }

    if order.is_empty() {
        return Err(GmilError::Empty(format!("{} contains no instances", source.display())));
    }

    let bags = order
        .into_iter()
        .map(|id| {
            let (label, instances) = groups.remove(&id).expect("grouped id");
            Bag::new(id, label, instances)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(bags)
}

/// Writes the native layout with a header row. Floats use the shortest
/// representation that parses back to the identical value.
pub fn write_csv<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    write!(out, "bag_id,label")?;
    for k in 1..=ds.dimension {
        write!(out, ",f{k}")?;
    }
    writeln!(out)?;
    for bag in &ds.bags {
        for inst in &bag.instances {
            write!(out, "{},{}", bag.id, bag.label)?;
            for v in inst.iter() {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Transforms

/// Anything that maps instances of one dimension to another.
pub trait Transform {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    None,
    #[default]
    #[serde(alias = "minmax")]
    MinMax,
    #[serde(alias = "zscore")]
    ZScore,
}

impl FromStr for NormalizationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NormalizationMode::None),
            "minmax" | "min-max" => Ok(NormalizationMode::MinMax),
            "zscore" | "z-score" => Ok(NormalizationMode::ZScore),
            other => Err(format!("unknown normalization `{other}`")),
        }
    }
}

/// Per-feature affine map `x' = (x - offset) * scale`.
///
/// Constant features get `scale = 0` and therefore map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: NormalizationMode,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(d: usize) -> Self {
        Normalizer {
            mode: NormalizationMode::None,
            offset: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }
}

impl Transform for Normalizer {
    fn input_dim(&self) -> usize {
        self.offset.len()
    }

    fn output_dim(&self) -> usize {
        self.offset.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) * s)
            .collect()
    }
}

/// Fits scaling parameters on every instance of `ds`.
pub fn fit_normalizer(ds: &Dataset, mode: NormalizationMode) -> Normalizer {
    let d = ds.dimension;
    match mode {
        NormalizationMode::None => Normalizer::identity(d),
        NormalizationMode::MinMax => {
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for inst in ds.instances() {
                for (k, &v) in inst.iter().enumerate() {
                    lo[k] = lo[k].min(v);
                    hi[k] = hi[k].max(v);
                }
            }
            let scale = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| if h > l { 1.0 / (h - l) } else { 0.0 })
                .collect();
            Normalizer {
                mode,
                offset: lo,
                scale,
            }
        }
        NormalizationMode::ZScore => {
            let n = ds.n_instances() as f64;
            let mut mean = vec![0.0; d];
            for inst in ds.instances() {
                for (m, v) in mean.iter_mut().zip(inst.iter()) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; d];
            for inst in ds.instances() {
                for k in 0..d {
                    let c = inst[k] - mean[k];
                    var[k] += c * c;
                }
            }
            let scale = var
                .iter()
                .map(|v| {
                    let sd = (v / n).sqrt();
                    if sd > 0.0 {
                        1.0 / sd
                    } else {
                        0.0
                    }
                })
                .collect();
            Normalizer {
                mode,
                offset: mean,
                scale,
            }
        }
    }
}

/// Projection onto the top principal directions of the instance covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// `r` rows of length `d`, orthonormal.
    pub basis: Vec<Vec<f64>>,
    /// Eigenvalues matching `basis`, descending.
    pub variances: Vec<f64>,
}

impl PcaTransform {
    pub fn retained(&self) -> usize {
        self.basis.len()
    }
}

impl Transform for PcaTransform {
    fn input_dim(&self) -> usize {
        self.mean.len()
    }

    fn output_dim(&self) -> usize {
        self.basis.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(b, (v, m))| b * (v - m))
                    .sum()
            })
            .collect()
    }
}

/// Fits a rank-`r` PCA on all instances of `ds` (population covariance).
///
/// Rows are ordered by descending eigenvalue and signed so that each row's
/// largest-magnitude entry is positive.
pub fn fit_pca(ds: &Dataset, r: usize) -> Result<PcaTransform> {
    let d = ds.dimension;
    if r == 0 || r > d {
        return Err(GmilError::param(format!(
            "PCA retained dimension must be in 1..={d}, got {r}"
        )));
    }
    let n = ds.n_instances();
    if n < 2 {
        return Err(GmilError::Empty("PCA needs at least 2 instances".into()));
    }

    let mut mean = vec![0.0; d];
    for inst in ds.instances() {
        for (m, v) in mean.iter_mut().zip(inst.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for inst in ds.instances() {
        for k in 0..d {
            centered[k] = inst[k] - mean[k];
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut basis = Vec::with_capacity(r);
    let mut variances = Vec::with_capacity(r);
    for &col in order.iter().take(r) {
        let mut row: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
        let pivot = row.iter().enumerate().fold(
            (0, 0.0f64),
            |best, (k, v)| if v.abs() > best.1.abs() { (k, *v) } else { best },
        );
        if pivot.1 < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        basis.push(row);
        variances.push(eig.eigenvalues[col].max(0.0));
    }

    Ok(PcaTransform { mean, basis, variances })
}

/// Maps every instance; bag structure and labels are untouched.
pub fn apply_transform<T: Transform + ?Sized>(ds: &Dataset, t: &T) -> Result<Dataset> {
    if t.input_dim() != ds.dimension {
        return Err(GmilError::DimensionMismatch {
            expected: t.input_dim(),
            found: ds.dimension,
        });
    }
    let bags = ds
        .bags
        .iter()
        .map(|b| Bag {
            id: b.id.clone(),
            label: b.label,
            instances: b.instances.iter().map(|x| Instance(t.apply(x))).collect(),
        })
        .collect();
    Ok(Dataset {
        dimension: t.output_dim(),
        bags,
    })
}
