//! From-scratch tree learners: a CART-style classification tree, a random
//! forest of such trees, and Newton-boosted regression trees on the softmax
//! objective. Class weights enter every learner as per-sample masses.
//!
//! Splits are found by exact search over midpoints between consecutive
//! distinct feature values. Rows are kept presorted per feature and
//! partitioned stably as the tree grows, so each level costs `O(n · d)`.

mod boost;
mod cart;
mod forest;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use boost::{gbt_fit, GbtParams, GradientBoostedTrees};
pub use cart::{dt_fit, dt_fit_with_masses, Criterion, DecisionTree, TreeParams};
pub use forest::{rf_fit, ForestParams, MaxFeatures, RandomForest};

/// A node of a binary tree stored in a flat arena; the root is node 0.
///
/// Internal nodes send `x[feature] <= threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: L,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(&self, row: &[f64]) -> &L {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Feature matrix in column-major order.
pub(crate) struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    pub(crate) fn new(x: ArrayView2<'_, f64>) -> Self {
        Self {
            cols: x.columns().into_iter().map(|c| c.to_vec()).collect(),
        }
    }

    pub(crate) fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn value(&self, feature: usize, row: u32) -> f64 {
        self.cols[feature][row as usize]
    }

    /// Every row index, sorted by value, once per feature. Ties keep row order.
    pub(crate) fn presort(&self) -> Vec<Vec<u32>> {
        self.cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect()
    }
}

/// Midpoint between two consecutive distinct values, never rounding up to `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Splits every feature's sorted row list into the rows routed left and right,
/// preserving order. `goes_left` is indexed by row.
pub(crate) fn partition(
    sorted: Vec<Vec<u32>>,
    goes_left: &[bool],
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let mut left = Vec::with_capacity(sorted.len());
    let mut right = Vec::with_capacity(sorted.len());
    for list in sorted {
        let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| goes_left[i as usize]);
        left.push(l);
        right.push(r);
    }
    (left, right)
}

pub(crate) fn check_fit_inputs(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    weights: &[f64],
    k: usize,
) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("training set has no features"));
    }
    if weights.len() != k {
        return Err(Error::Shape(format!(
            "{k} classes but {} class weights",
            weights.len()
        )));
    }
    if y.iter().any(|&c| c >= k) {
        return Err(Error::invalid("label out of range"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid(
            "class weights must be finite and non-negative",
        ));
    }
    Ok(())
}

/// Row-wise prediction helper shared by the tree ensembles.
pub(crate) fn map_rows(
    x: ArrayView2<'_, f64>,
    k: usize,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), k));
    let mut buf = vec![0.0; x.ncols()];
    for (i, row) in x.rows().into_iter().enumerate() {
        buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
        let mut o = out.row_mut(i);
        f(&buf, o.as_slice_mut().expect("contiguous"));
    }
    out
}
