use std::collections::HashMap;

use ndarray::Array2;

use super::{ColumnKind, Dataset, RawDataset, RawValues};
use crate::error::{Error, Result};

/// Columns missing in more than this fraction of rows are dropped.
const MAX_MISSING_FRACTION: f64 = 0.5;
/// Lower bound on the standard deviation used for z-scoring.
const STD_FLOOR: f64 = 1e-12;

/// Imputes, standardizes and one-hot encodes a raw table.
///
/// * columns with more than half their cells missing are dropped;
/// * continuous columns are median-imputed, then z-scored to mean 0 and
///   sample variance 1 (zero-variance columns are kept, the denominator is
///   floored);
/// * categorical columns are mode-imputed and expanded into one indicator per
///   observed category, in first-appearance order, named `column=value`;
/// * indicator columns are mode-imputed and passed through.
pub fn preprocess(raw: &RawDataset) -> Result<Dataset> {
    let n = raw.n_rows();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut kinds = Vec::new();

    for feature in &raw.features {
        if n == 0 || feature.values.missing_count() as f64 > MAX_MISSING_FRACTION * n as f64 {
            log::debug!(
                "dropping column '{}' (too many missing cells)",
                feature.name
            );
            continue;
        }
        match (&feature.values, feature.kind) {
            (RawValues::Numeric(cells), ColumnKind::Continuous) => {
                columns.push(standardize(&impute_median(cells)));
                names.push(feature.name.clone());
                kinds.push(ColumnKind::Continuous);
            }
            (RawValues::Numeric(cells), _) => {
                columns.push(impute_mode_numeric(cells));
                names.push(feature.name.clone());
                kinds.push(ColumnKind::Indicator);
            }
            (RawValues::Categorical(cells), _) => {
                let (categories, filled) = impute_mode_categorical(cells);
                for cat in &categories {
                    columns.push(
                        filled
                            .iter()
                            .map(|v| if v == cat { 1.0 } else { 0.0 })
                            .collect(),
                    );
                    names.push(format!("{}={}", feature.name, cat));
                    kinds.push(ColumnKind::Indicator);
                }
            }
        }
    }

    if columns.is_empty() {
        return Err(Error::NoUsableFeatures);
    }
    let d = columns.len();
    let features = Array2::from_shape_fn((n, d), |(i, j)| columns[j][i]);
    Dataset::with_kinds(
        features,
        raw.labels.clone(),
        raw.class_names.clone(),
        names,
        kinds,
    )
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

fn impute_median(cells: &[Option<f64>]) -> Vec<f64> {
    let mut observed: Vec<f64> = cells.iter().flatten().copied().collect();
    observed.sort_by(f64::total_cmp);
    let fill = median(&observed);
    cells.iter().map(|c| c.unwrap_or(fill)).collect()
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt().max(STD_FLOOR);
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Most frequent value; ties go to the value seen first.
fn mode_by_first_appearance<T: Clone + Eq + std::hash::Hash>(
    observed: impl Iterator<Item = T>,
) -> (Vec<T>, T) {
    let mut order: Vec<T> = Vec::new();
    let mut counts: HashMap<T, usize> = HashMap::new();
    for v in observed {
        let c = counts.entry(v.clone()).or_insert(0);
        if *c == 0 {
            order.push(v);
        }
        *c += 1;
    }
    let mut best = order[0].clone();
    for v in &order {
        if counts[v] > counts[&best] {
            best = v.clone();
        }
    }
    (order, best)
}

fn impute_mode_categorical(cells: &[Option<String>]) -> (Vec<String>, Vec<String>) {
    let (order, mode) = mode_by_first_appearance(cells.iter().flatten().cloned());
    let filled = cells
        .iter()
        .map(|c| c.clone().unwrap_or_else(|| mode.clone()))
        .collect();
    (order, filled)
}

fn impute_mode_numeric(cells: &[Option<f64>]) -> Vec<f64> {
    let (_, mode) = mode_by_first_appearance(cells.iter().flatten().map(|v| v.to_bits()));
    let mode = f64::from_bits(mode);
    cells.iter().map(|c| c.unwrap_or(mode)).collect()
}
