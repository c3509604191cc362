use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::block::{block_id, BlockResult};
use crate::error::{Error, Result};
use crate::stats::{BlockMatrix, Direction};

/// A per-row quantity that can be compared across classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    WeightedF1,
    MacroF1,
    Accuracy,
    MinorityRecall,
    TrainingSeconds,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::WeightedF1 => "weighted_f1",
            Metric::MacroF1 => "macro_f1",
            Metric::Accuracy => "accuracy",
            Metric::MinorityRecall => "minority_recall",
            Metric::TrainingSeconds => "training_seconds",
        }
    }

    /// Whether larger values are better.
    pub fn natural_direction(&self) -> Direction {
        match self {
            Metric::TrainingSeconds => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    pub fn get(&self, r: &BlockResult) -> Option<f64> {
        match self {
            Metric::WeightedF1 => r.weighted_f1,
            Metric::MacroF1 => r.macro_f1,
            Metric::Accuracy => r.accuracy,
            Metric::MinorityRecall => r.minority_recall,
            Metric::TrainingSeconds => r.training_seconds,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_f1" => Ok(Metric::WeightedF1),
            "macro_f1" => Ok(Metric::MacroF1),
            "accuracy" => Ok(Metric::Accuracy),
            "minority_recall" => Ok(Metric::MinorityRecall),
            "training_seconds" => Ok(Metric::TrainingSeconds),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Per-classifier running (sum, count) of one block.
type Cell<'a> = BTreeMap<&'a str, (f64, usize)>;

/// Blocks `target@threshold` by classifiers, each cell the mean of `metric`
/// over completed runs. Blocks missing any classifier are dropped.
pub fn pivot_results(rows: &[BlockResult], metric: Metric) -> Result<BlockMatrix> {
    let classifiers: BTreeSet<&str> = rows.iter().map(|r| r.classifier.as_str()).collect();
    let mut cells: BTreeMap<(&str, usize), Cell<'_>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        if let Some(v) = metric.get(r) {
            let acc = cells
                .entry((&r.target, r.filter_threshold))
                .or_default()
                .entry(&r.classifier)
                .or_insert((0.0, 0));
            acc.0 += v;
            acc.1 += 1;
        }
    }
    let treatments: Vec<String> = classifiers.iter().map(|s| s.to_string()).collect();
    let mut blocks = Vec::new();
    let mut values = Vec::new();
    for ((target, threshold), by_clf) in &cells {
        if by_clf.len() < classifiers.len() {
            log::warn!(
                "dropping block {} with {} of {} classifiers",
                block_id(target, *threshold),
                by_clf.len(),
                classifiers.len()
            );
            continue;
        }
        blocks.push(block_id(target, *threshold));
        values.push(
            classifiers
                .iter()
                .map(|c| by_clf[c].0 / by_clf[c].1 as f64)
                .collect(),
        );
    }
    if blocks.is_empty() {
        return Err(Error::invalid("no block has results for every classifier"));
    }
    BlockMatrix::new(blocks, treatments, values)
}
