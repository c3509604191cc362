//! Confusion-matrix evaluation: accuracy and per-class, macro and
//! support-weighted F1.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K x K` counts, rows are true classes and columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(Self {
            k,
            cells: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.cells[truth * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn true_positives(&self, k: usize) -> u64 {
        self.get(k, k)
    }

    /// Predicted as `k` but belonging elsewhere.
    pub fn false_positives(&self, k: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, k)).sum::<u64>() - self.get(k, k)
    }

    pub fn false_negatives(&self, k: usize) -> u64 {
        self.support(k) - self.get(k, k)
    }

    /// Number of samples whose true class is `k`.
    pub fn support(&self, k: usize) -> u64 {
        (0..self.k).map(|p| self.get(k, p)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.cells.chunks(self.k).map(<[u64]>::to_vec).collect()
    }
}

/// Confusion matrix of `predicted` against `truth` over `k` classes.
pub fn confusion(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cells = vec![0u64; k * k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::invalid(format!(
                "label out of range for {k} classes"
            )));
        }
        cells[t * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, cells })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("accuracy of an empty confusion matrix"));
    }
    let trace: u64 = (0..cm.n_classes()).map(|k| cm.get(k, k)).sum();
    Ok(trace as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-class F1 plus its unweighted and support-weighted means. Precision,
/// recall or F1 with a zero denominator count as 0.
pub fn f1_scores(cm: &ConfusionMatrix) -> F1Scores {
    let k = cm.n_classes();
    let total = cm.total() as f64;
    let per_class: Vec<f64> = (0..k)
        .map(|c| {
            let tp = cm.true_positives(c) as f64;
            let precision = ratio(tp, tp + cm.false_positives(c) as f64);
            let recall = ratio(tp, tp + cm.false_negatives(c) as f64);
            ratio(2.0 * precision * recall, precision + recall)
        })
        .collect();
    let macro_f1 = per_class.iter().sum::<f64>() / k as f64;
    let weighted_f1 = per_class
        .iter()
        .enumerate()
        .map(|(c, f)| ratio(cm.support(c) as f64, total) * f)
        .sum();
    F1Scores {
        per_class,
        macro_f1,
        weighted_f1,
    }
}

/// Recall of class `k`; 0 when the class has no support.
pub fn recall(cm: &ConfusionMatrix, k: usize) -> f64 {
    ratio(cm.true_positives(k) as f64, cm.support(k) as f64)
}

/// Index of the largest entry in each row; ties go to the lowest index.
pub fn argmax_rows(p: ArrayView2<'_, f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Accuracy plus both F1 aggregates of one prediction vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

pub fn evaluate(truth: &[usize], predicted: &[usize], k: usize) -> Result<Evaluation> {
    let cm = confusion(truth, predicted, k)?;
    let f1 = f1_scores(&cm);
    Ok(Evaluation {
        accuracy: accuracy(&cm)?,
        macro_f1: f1.macro_f1,
        weighted_f1: f1.weighted_f1,
    })
}
