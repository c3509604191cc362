use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{check_fit_inputs, map_rows, midpoint, partition, Columns, Node, Tree};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::weighting::ClassWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            _ => Err(Error::invalid(format!("unknown criterion '{s}'"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

/// Growth limits of a single classification tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 10,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
        }
    }
}

/// Deepest tree accepted; keeps recursion bounded.
pub(crate) const MAX_DEPTH_LIMIT: usize = 64;

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.max_depth > MAX_DEPTH_LIMIT {
            return Err(Error::invalid(format!(
                "max_depth must be in 1..={MAX_DEPTH_LIMIT}"
            )));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// A fitted classification tree whose leaves hold class-mass proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub tree: Tree<Vec<f64>>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        map_rows(x, self.n_classes, |row, out| {
            out.copy_from_slice(self.tree.leaf(row))
        })
    }

    pub(crate) fn add_proba(&self, row: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(self.tree.leaf(row)) {
            *o += v;
        }
    }
}

/// Fits a tree where sample `i` carries mass `w_{y_i}`.
pub fn dt_fit(
    train: &Dataset,
    params: &TreeParams,
    weights: &ClassWeights,
    _seed: u64,
) -> Result<DecisionTree> {
    dt_fit_with_masses(
        train.features().view(),
        train.labels(),
        train.n_classes(),
        weights.as_slice(),
        params,
    )
}

/// [`dt_fit`] on raw arrays, with explicit class weights.
pub fn dt_fit_with_masses(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    k: usize,
    class_weights: &[f64],
    params: &TreeParams,
) -> Result<DecisionTree> {
    params.validate()?;
    check_fit_inputs(x, y, class_weights, k)?;
    let cols = Columns::new(x);
    let counts = vec![1u32; y.len()];
    let tree = ClassTreeBuilder::new(&cols, y, k, class_weights, &counts, params, None)
        .build(cols.presort());
    Ok(DecisionTree {
        tree,
        n_classes: k,
        n_features: x.ncols(),
    })
}

/// Grows one classification tree on presorted rows.
///
/// Rows may carry a multiplicity (bootstrap counts); a row's mass is its
/// multiplicity times its class weight and its sample count is the
/// multiplicity alone.
pub(crate) struct ClassTreeBuilder<'a> {
    cols: &'a Columns,
    y: &'a [usize],
    k: usize,
    mass: Vec<f64>,
    counts: &'a [u32],
    params: &'a TreeParams,
    feature_sampling: Option<(usize, &'a mut Rng)>,
    nodes: Vec<Node<Vec<f64>>>,
    goes_left: Vec<bool>,
    left_mass: Vec<f64>,
    right_mass: Vec<f64>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

impl<'a> ClassTreeBuilder<'a> {
    pub(crate) fn new(
        cols: &'a Columns,
        y: &'a [usize],
        k: usize,
        class_weights: &[f64],
        counts: &'a [u32],
        params: &'a TreeParams,
        feature_sampling: Option<(usize, &'a mut Rng)>,
    ) -> Self {
        let mass = y
            .iter()
            .zip(counts)
            .map(|(&c, &m)| m as f64 * class_weights[c])
            .collect();
        Self {
            cols,
            y,
            k,
            mass,
            counts,
            params,
            feature_sampling,
            nodes: Vec::new(),
            goes_left: vec![false; y.len()],
            left_mass: vec![0.0; k],
            right_mass: vec![0.0; k],
        }
    }

    /// `sorted` holds, per feature, the participating rows in value order.
    pub(crate) fn build(mut self, sorted: Vec<Vec<u32>>) -> Tree<Vec<f64>> {
        let uniform = vec![1.0 / self.k as f64; self.k];
        self.grow(sorted, 0, &uniform);
        Tree { nodes: self.nodes }
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize, parent: &[f64]) -> usize {
        let mut class_mass = vec![0.0; self.k];
        let mut n_count = 0usize;
        for &r in &sorted[0] {
            class_mass[self.y[r as usize]] += self.mass[r as usize];
            n_count += self.counts[r as usize] as usize;
        }
        let total: f64 = class_mass.iter().sum();
        let dist: Vec<f64> = if total > 0.0 {
            class_mass.iter().map(|m| m / total).collect()
        } else {
            parent.to_vec()
        };
        let classes_present = class_mass.iter().filter(|&&m| m > 0.0).count();

        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: dist.clone(),
        });
        if depth >= self.params.max_depth
            || n_count < self.params.min_samples_split
            || classes_present <= 1
        {
            return id;
        }
        let Some(best) = self.best_split(&sorted, &class_mass, n_count) else {
            return id;
        };

        for &r in &sorted[0] {
            self.goes_left[r as usize] = self.cols.value(best.feature, r) <= best.threshold;
        }
        let (left_rows, right_rows) = partition(sorted, &self.goes_left);
        let left = self.grow(left_rows, depth + 1, &dist);
        let right = self.grow(right_rows, depth + 1, &dist);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.cols.n_features();
        match &mut self.feature_sampling {
            Some((m, rng)) if *m < d => {
                let mut f = index::sample(*rng, d, *m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(
        &mut self,
        sorted: &[Vec<u32>],
        class_mass: &[f64],
        n_count: usize,
    ) -> Option<Candidate> {
        let total: f64 = class_mass.iter().sum();
        let criterion = self.params.criterion;
        let min_leaf = self.params.min_samples_leaf;
        // score(M) = M * impurity; gini: M - Σm²/M, entropy: M ln M - Σ m ln m
        let (parent_acc, score): (f64, fn(f64, f64) -> f64) = match criterion {
            Criterion::Gini => (class_mass.iter().map(|m| m * m).sum(), |m, acc| {
                if m > 0.0 {
                    m - acc / m
                } else {
                    0.0
                }
            }),
            Criterion::Entropy => (class_mass.iter().map(|&m| xlnx(m)).sum(), |m, acc| {
                xlnx(m) - acc
            }),
        };
        let term = |m: f64| match criterion {
            Criterion::Gini => m * m,
            Criterion::Entropy => xlnx(m),
        };
        let parent_score = score(total, parent_acc);

        let mut best: Option<Candidate> = None;
        for f in self.candidate_features() {
            let list = &sorted[f];
            self.left_mass.iter_mut().for_each(|m| *m = 0.0);
            self.right_mass.copy_from_slice(class_mass);
            let (mut left_acc, mut right_acc) = (0.0, parent_acc);
            let (mut left_total, mut left_count) = (0.0, 0usize);
            for pos in 0..list.len() - 1 {
                let r = list[pos] as usize;
                let c = self.y[r];
                let m = self.mass[r];
                if m != 0.0 {
                    left_acc += term(self.left_mass[c] + m) - term(self.left_mass[c]);
                    right_acc += term(self.right_mass[c] - m) - term(self.right_mass[c]);
                    self.left_mass[c] += m;
                    self.right_mass[c] -= m;
                    left_total += m;
                }
                left_count += self.counts[r] as usize;

                let v = self.cols.value(f, list[pos]);
                let next = self.cols.value(f, list[pos + 1]);
                if v == next || left_count < min_leaf || n_count - left_count < min_leaf {
                    continue;
                }
                let right_total = total - left_total;
                let gain = parent_score
                    - score(left_total, left_acc)
                    - score(right_total.max(0.0), right_acc);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(v, next),
                        gain,
                    });
                }
            }
        }
        best
    }
}
