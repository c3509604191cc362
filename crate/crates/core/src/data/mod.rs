//! Datasets, schemas, ingestion and the transformations applied before
//! training: preprocessing, controlled-imbalance filtering, stratified
//! splitting and synthetic generation.

mod csv_io;
mod preprocess;
mod schema;
mod split;
mod synth;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, read_csv};
pub use preprocess::preprocess;
pub use schema::{ColumnKind, ColumnRole, ColumnSchema, ColumnSpec};
pub use split::{stratified_kfold, stratified_split, SplitFractions, SplitIndices};
pub use synth::{synth_class_counts, synth_generate, SynthConfig};

/// Cell values of one raw feature column, before imputation and encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl RawValues {
    pub fn len(&self) -> usize {
        match self {
            RawValues::Numeric(v) => v.len(),
            RawValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            RawValues::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            RawValues::Categorical(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            RawValues::Numeric(v) => v[row].is_none(),
            RawValues::Categorical(v) => v[row].is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawFeature {
    pub name: String,
    pub kind: ColumnKind,
    pub values: RawValues,
}

/// A freshly loaded table: labels are resolved, feature cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Vec<RawFeature>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub label_name: String,
}

impl RawDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

/// Encoded feature matrix with dense integer labels.
///
/// Rows are samples. Labels are class ids in `0..n_classes()`, indexing into
/// `class_names`. Values are immutable once constructed; transformations
/// return new datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    feature_kinds: Vec<ColumnKind>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let kinds = vec![ColumnKind::Continuous; feature_names.len()];
        Self::with_kinds(features, labels, class_names, feature_names, kinds)
    }

    pub fn with_kinds(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
        feature_kinds: Vec<ColumnKind>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() != feature_names.len() || feature_kinds.len() != feature_names.len() {
            return Err(Error::Shape(format!(
                "{} feature columns but {} names and {} kinds",
                features.ncols(),
                feature_names.len(),
                feature_kinds.len()
            )));
        }
        if class_names.len() < 2 {
            return Err(Error::invalid("a dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            feature_names,
            feature_kinds,
        })
    }

    /// Convenience constructor naming classes `class_0..` and features `x0..`.
    pub fn from_parts(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let class_names = (0..n_classes).map(|k| format!("class_{k}")).collect();
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(features, labels, class_names, feature_names)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[ColumnKind] {
        &self.feature_kinds
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Per-class sample counts, length `n_classes()`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows selected by `indices`, keeping the full class list.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
        }
    }

    /// Drops every class with fewer than `min_count` samples and re-densifies
    /// the surviving labels, preserving their original order.
    pub fn filter_min_class_count(&self, min_count: usize) -> Result<Dataset> {
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        let counts = self.class_counts();
        let mut remap = vec![None; counts.len()];
        let mut class_names = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            if c >= min_count {
                remap[k] = Some(class_names.len());
                class_names.push(self.class_names[k].clone());
            }
        }
        if class_names.len() < 2 {
            return Err(Error::DegenerateAfterFiltering {
                min_count,
                surviving: class_names.len(),
            });
        }
        let rows: Vec<usize> = (0..self.n_samples())
            .filter(|&i| remap[self.labels[i]].is_some())
            .collect();
        Ok(Dataset {
            features: self.features.select(Axis(0), &rows),
            labels: rows
                .iter()
                .map(|&i| remap[self.labels[i]].expect("kept row"))
                .collect(),
            class_names,
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
        })
    }

    /// Back to raw form, e.g. to re-run preprocessing or export.
    pub fn to_raw(&self, label_name: &str) -> RawDataset {
        let features = self
            .feature_names
            .iter()
            .zip(&self.feature_kinds)
            .enumerate()
            .map(|(j, (name, &kind))| RawFeature {
                name: name.clone(),
                kind,
                values: RawValues::Numeric(
                    self.features.column(j).iter().map(|&v| Some(v)).collect(),
                ),
            })
            .collect();
        RawDataset {
            features,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            label_name: label_name.to_string(),
        }
    }

    /// Schema describing the CSV written by [`Dataset::write_csv`].
    pub fn schema(&self, label_name: &str) -> ColumnSchema {
        let mut columns: Vec<ColumnSpec> = self
            .feature_names
            .iter()
            .zip(&self.feature_kinds)
            .map(|(name, &kind)| ColumnSpec {
                name: name.clone(),
                role: ColumnRole::Feature,
                kind,
            })
            .collect();
        columns.push(ColumnSpec {
            name: label_name.to_string(),
            role: ColumnRole::Label,
            kind: ColumnKind::Categorical,
        });
        ColumnSchema { columns }
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>, label_name: &str) -> Result<()> {
        csv_io::write_dataset(self, path.as_ref(), label_name)
    }
}

/// Free-function form of [`Dataset::filter_min_class_count`].
pub fn filter_min_class_count(data: &Dataset, min_count: usize) -> Result<Dataset> {
    data.filter_min_class_count(min_count)
}
