use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::cart::MAX_DEPTH_LIMIT;
use super::{check_fit_inputs, midpoint, partition, Columns, Node, Tree};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::softmax_in_place;
use crate::rng;
use crate::weighting::ClassWeights;

/// Leaves whose hessian sum is below this are treated as empty.
const HESSIAN_FLOOR: f64 = 1e-16;
/// Smallest class prior used for the initial margins.
const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub colsample: f64,
    /// L1 penalty on leaf values.
    pub reg_alpha: f64,
    /// L2 penalty on leaf values.
    pub reg_lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            learning_rate: 0.1,
            max_depth: 4,
            subsample: 0.8,
            colsample: 0.8,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.max_depth == 0 || self.max_depth > MAX_DEPTH_LIMIT {
            return Err(Error::invalid(format!(
                "max_depth must be in 1..={MAX_DEPTH_LIMIT}"
            )));
        }
        for (name, v) in [("subsample", self.subsample), ("colsample", self.colsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.reg_alpha >= 0.0 && self.reg_lambda >= 0.0) {
            return Err(Error::invalid("regularization terms must be non-negative"));
        }
        Ok(())
    }
}

/// Softmax-boosted ensemble: one regression tree per class per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostedTrees {
    pub initial_margins: Vec<f64>,
    pub learning_rate: f64,
    pub rounds: Vec<Vec<Tree<f64>>>,
    pub n_classes: usize,
}

impl GradientBoostedTrees {
    fn margins_into(&self, row: &[f64], rounds: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.initial_margins);
        for trees in self.rounds.iter().take(rounds) {
            for (o, t) in out.iter_mut().zip(trees) {
                *o += self.learning_rate * t.leaf(row);
            }
        }
    }

    /// Class probabilities using only the first `rounds` boosting rounds.
    pub fn predict_proba_rounds(&self, x: ArrayView2<'_, f64>, rounds: usize) -> Array2<f64> {
        super::map_rows(x, self.n_classes, |row, out| {
            self.margins_into(row, rounds, out);
            softmax_in_place(out);
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.predict_proba_rounds(x, self.rounds.len())
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

struct RegTreeBuilder<'a> {
    cols: &'a Columns,
    features: &'a [usize],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<Node<f64>>,
    goes_left: Vec<bool>,
    all_leaves_empty: bool,
}

impl RegTreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let den = h + self.params.reg_lambda;
        if den > 0.0 {
            soft_threshold(g, self.params.reg_alpha).powi(2) / den
        } else {
            0.0
        }
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -soft_threshold(g, self.params.reg_alpha) / (h.max(HESSIAN_FLOOR) + self.params.reg_lambda)
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let (g, h) = sorted[0].iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.params.max_depth || sorted[0].len() < 2 {
            self.all_leaves_empty &= h < HESSIAN_FLOOR;
            return id;
        }

        let parent = self.score(g, h);
        let mut best: Option<(usize, f64, f64)> = None;
        for (slot, list) in sorted.iter().enumerate() {
            let f = self.features[slot];
            let (mut gl, mut hl) = (0.0, 0.0);
            for pos in 0..list.len() - 1 {
                let r = list[pos] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                let v = self.cols.value(f, list[pos]);
                let next = self.cols.value(f, list[pos + 1]);
                if v == next {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(g - gl, h - hl) - parent;
                if gain >= 0.0 && best.is_none_or(|b| gain > b.2) {
                    best = Some((slot, midpoint(v, next), gain));
                }
            }
        }
        let Some((slot, threshold, _)) = best else {
            self.all_leaves_empty &= h < HESSIAN_FLOOR;
            return id;
        };
        let feature = self.features[slot];
        for &r in &sorted[0] {
            self.goes_left[r as usize] = self.cols.value(feature, r) <= threshold;
        }
        let (l, r) = partition(sorted, &self.goes_left);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Multiclass Newton boosting on the class-weighted softmax cross-entropy.
///
/// Each round computes per-sample gradients `w_y (p_k - y_k)` and hessians
/// `w_y p_k (1 - p_k)` from the current margins, fits one regression tree per
/// class on a row subsample (and a per-tree column subsample), and adds the
/// leaf values `-S_α(G) / (H + λ)` scaled by the learning rate. Margins start
/// at the log class priors.
pub fn gbt_fit(
    train: &Dataset,
    params: &GbtParams,
    weights: &ClassWeights,
    seed: u64,
) -> Result<GradientBoostedTrees> {
    params.validate()?;
    let x = train.features().view();
    let y = train.labels();
    let k = train.n_classes();
    let w = weights.as_slice();
    check_fit_inputs(x, y, w, k)?;

    let n = y.len();
    let cols = Columns::new(x);
    let d = cols.n_features();
    let presorted = cols.presort();

    let counts = train.class_counts();
    let initial_margins: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(PRIOR_FLOOR).ln())
        .collect();
    let mut model = GradientBoostedTrees {
        initial_margins: initial_margins.clone(),
        learning_rate: params.learning_rate,
        rounds: Vec::with_capacity(params.n_estimators),
        n_classes: k,
    };

    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut margins: Vec<Vec<f64>> = vec![initial_margins; n];
    let mut probs = vec![vec![0.0; k]; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample * d as f64).round() as usize).clamp(1, d);

    for round in 0..params.n_estimators {
        let mut rng = rng::substream(seed, round as u64);
        for (p, m) in probs.iter_mut().zip(&margins) {
            p.copy_from_slice(m);
            softmax_in_place(p);
        }
        let sorted_round: Vec<Vec<u32>> = if n_rows < n {
            let mut in_sample = vec![false; n];
            for r in index::sample(&mut rng, n, n_rows) {
                in_sample[r] = true;
            }
            presorted
                .iter()
                .map(|l| {
                    l.iter()
                        .copied()
                        .filter(|&r| in_sample[r as usize])
                        .collect()
                })
                .collect()
        } else {
            presorted.clone()
        };

        let mut trees = Vec::with_capacity(k);
        let mut round_empty = true;
        #[allow(clippy::needless_range_loop)]
        for class in 0..k {
            for i in 0..n {
                let wi = w[y[i]];
                let p = probs[i][class];
                let target = if y[i] == class { 1.0 } else { 0.0 };
                grad[i] = wi * (p - target);
                hess[i] = wi * p * (1.0 - p);
            }
            let features: Vec<usize> = if n_cols < d {
                let mut f = index::sample(&mut rng, d, n_cols).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..d).collect()
            };
            let sorted: Vec<Vec<u32>> = features.iter().map(|&f| sorted_round[f].clone()).collect();
            let mut builder = RegTreeBuilder {
                cols: &cols,
                features: &features,
                grad: &grad,
                hess: &hess,
                params,
                nodes: Vec::new(),
                goes_left: vec![false; n],
                all_leaves_empty: true,
            };
            builder.grow(sorted, 0);
            round_empty &= builder.all_leaves_empty;
            trees.push(Tree {
                nodes: builder.nodes,
            });
        }
        if round_empty {
            log::warn!(
                "boosting round {round} skipped: every leaf hessian sum is below {HESSIAN_FLOOR:e}"
            );
            continue;
        }
        for (row, m) in rows.iter().zip(margins.iter_mut()) {
            for (mk, t) in m.iter_mut().zip(&trees) {
                *mk += params.learning_rate * t.leaf(row);
            }
        }
        model.rounds.push(trees);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::losses::weighted_cce;
    use ndarray::Array2;

    fn xor(copies: usize) -> Dataset {
        let pts = [
            ([0.0, 0.0], 0),
            ([0.0, 1.0], 1),
            ([1.0, 0.0], 1),
            ([1.0, 1.0], 0),
        ];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..copies {
            for (p, c) in pts {
                x.extend_from_slice(&p);
                y.push(c);
            }
        }
        Dataset::from_parts(Array2::from_shape_vec((y.len(), 2), x).unwrap(), y, 2).unwrap()
    }

    fn train_loss(m: &GradientBoostedTrees, d: &Dataset, w: &[f64], rounds: usize) -> f64 {
        let p = m.predict_proba_rounds(d.features().view(), rounds);
        weighted_cce(d.labels(), p.view(), w).unwrap().0
    }

    #[test]
    fn zero_rounds_predict_the_prior() {
        let d = synth_generate(&SynthConfig {
            n_samples: 100,
            class_counts: Some(vec![70, 20, 10]),
            n_classes: 3,
            ..Default::default()
        })
        .unwrap();
        let params = GbtParams {
            n_estimators: 0,
            ..Default::default()
        };
        let m = gbt_fit(&d, &params, &ClassWeights::uniform(3), 0).unwrap();
        for row in m.predict_proba(d.features().view()).rows() {
            for (p, q) in row.iter().zip([0.7, 0.2, 0.1]) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_round_lowers_training_loss() {
        let d = synth_generate(&SynthConfig {
            n_samples: 400,
            cluster_separation: 4.0,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let params = GbtParams {
            n_estimators: 1,
            learning_rate: 0.3,
            ..Default::default()
        };
        let w = [1.0, 1.0];
        let m = gbt_fit(&d, &params, &ClassWeights::uniform(2), 0).unwrap();
        assert!(train_loss(&m, &d, &w, 1) < train_loss(&m, &d, &w, 0));
    }

    #[test]
    fn xor_is_learned() {
        let d = xor(10);
        let params = GbtParams {
            n_estimators: 50,
            learning_rate: 0.3,
            max_depth: 3,
            subsample: 1.0,
            colsample: 1.0,
            ..Default::default()
        };
        let m = gbt_fit(&d, &params, &ClassWeights::uniform(2), 0).unwrap();
        let p = m.predict_proba(d.features().view());
        for (row, &y) in p.rows().into_iter().zip(d.labels()) {
            assert!(row[y] > 0.5);
        }
    }

    #[test]
    fn full_batch_loss_never_increases() {
        for (seed, k, sep) in [(1u64, 2usize, 2.0), (2, 3, 1.5), (3, 5, 2.5)] {
            let d = synth_generate(&SynthConfig {
                n_samples: 500,
                n_classes: k,
                n_features: 4,
                power_law_exponent: 1.0,
                cluster_separation: sep,
                seed,
                ..Default::default()
            })
            .unwrap();
            let dist = crate::imbalance::LabelDistribution::from_counts(d.class_counts()).unwrap();
            let w = crate::weighting::weights_effective(&dist, 0.999).unwrap();
            let params = GbtParams {
                n_estimators: 20,
                learning_rate: 0.3,
                max_depth: 3,
                subsample: 1.0,
                colsample: 1.0,
                ..Default::default()
            };
            let m = gbt_fit(&d, &params, &w, seed).unwrap();
            let mut prev = train_loss(&m, &d, &w.weights, 0);
            for r in 1..=m.rounds.len() {
                let cur = train_loss(&m, &d, &w.weights, r);
                assert!(
                    cur <= prev + 1e-12,
                    "dataset {seed} round {r}: {cur} > {prev}"
                );
                prev = cur;
            }
        }
    }

    #[test]
    fn l1_shrinks_leaf_values_to_zero() {
        let d = xor(5);
        let params = GbtParams {
            n_estimators: 3,
            reg_alpha: 1e6,
            ..Default::default()
        };
        let m = gbt_fit(&d, &params, &ClassWeights::uniform(2), 0).unwrap();
        for trees in &m.rounds {
            for t in trees {
                for node in &t.nodes {
                    if let Node::Leaf { value } = node {
                        assert_eq!(*value, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weight_rounds_are_skipped() {
        let d = xor(3);
        let w = ClassWeights {
            weights: vec![0.0, 0.0],
            strategy: crate::weighting::WeightingStrategy::None,
            beta: None,
        };
        let m = gbt_fit(
            &d,
            &GbtParams {
                n_estimators: 4,
                ..Default::default()
            },
            &w,
            0,
        )
        .unwrap();
        assert!(m.rounds.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let d = synth_generate(&SynthConfig {
            n_samples: 200,
            n_classes: 3,
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        let p = GbtParams {
            n_estimators: 10,
            ..Default::default()
        };
        let a = gbt_fit(&d, &p, &ClassWeights::uniform(3), 5).unwrap();
        let b = gbt_fit(&d, &p, &ClassWeights::uniform(3), 5).unwrap();
        assert_eq!(a, b);
    }
}
