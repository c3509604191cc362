use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Train/validation/test proportions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.as_array();
        if f.iter().any(|&x| !(x > 0.0 && x < 1.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("invalid split fractions {f:?}")));
        }
        Ok(())
    }
}

/// Disjoint row indices, each list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `total` by `fractions`, with every
/// part at least 1 when `total >= parts`.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // stable sort keeps the lower split first on equal remainders
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &s in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[s] += 1;
        left -= 1;
    }
    if total >= fractions.len() {
        for s in 0..alloc.len() {
            if alloc[s] == 0 {
                // a part that was rounded up can give one back and stay within ±1
                let donor = (0..alloc.len())
                    .filter(|&t| alloc[t] as f64 > exact[t] && alloc[t] > 1)
                    .max_by(|&a, &b| {
                        (alloc[a] as f64 - exact[a]).total_cmp(&(alloc[b] as f64 - exact[b]))
                    })
                    .expect("some part exceeds its exact share");
                alloc[donor] -= 1;
                alloc[s] += 1;
            }
        }
    }
    alloc
}

/// Stratified train/validation/test split.
///
/// Each class is shuffled independently and sliced contiguously, so every
/// split holds within one sample of its exact share of every class.
pub fn stratified_split(
    data: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitIndices> {
    fractions.validate()?;
    let by_class = rows_by_class(data.labels(), data.n_classes());
    for (k, rows) in by_class.iter().enumerate() {
        if rows.len() < 3 {
            return Err(Error::ClassTooSmall {
                class: data.class_names()[k].clone(),
                count: rows.len(),
                needed: 3,
            });
        }
    }
    let mut rng = rng::seeded(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for mut rows in by_class {
        rows.shuffle(&mut rng);
        let sizes = apportion(rows.len(), &fractions.as_array());
        let mut start = 0;
        for (part, size) in parts.iter_mut().zip(sizes) {
            part.extend_from_slice(&rows[start..start + size]);
            start += size;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, validation, test] = parts;
    Ok(SplitIndices {
        train,
        validation,
        test,
    })
}

/// Stratified k-fold assignment: returns the held-out rows of each fold.
///
/// Classes are dealt round-robin after shuffling, with the starting fold
/// rotating from class to class so fold sizes stay balanced.
pub fn stratified_kfold(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if labels.len() < folds {
        return Err(Error::invalid(format!(
            "{} rows cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut out = vec![Vec::new(); folds];
    let mut offset = 0;
    for mut rows in rows_by_class(labels, n_classes) {
        rows.shuffle(&mut rng);
        for (i, r) in rows.iter().enumerate() {
            out[(offset + i) % folds].push(*r);
        }
        offset = (offset + rows.len()) % folds;
    }
    for f in out.iter_mut() {
        f.sort_unstable();
    }
    Ok(out)
}

fn rows_by_class(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    by_class
}
