use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cart::{ClassTreeBuilder, Criterion, DecisionTree, TreeParams, MAX_DEPTH_LIMIT};
use super::{check_fit_inputs, map_rows, Columns};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::weighting::ClassWeights;

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(&self, d: usize) -> usize {
        let m = match *self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::Fraction(f) => (f * d as f64).floor() as usize,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 16,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            criterion: self.criterion,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid("max_features fraction must lie in (0, 1]"));
            }
        }
        if self.max_depth > MAX_DEPTH_LIMIT {
            return Err(Error::invalid(format!(
                "max_depth must be in 1..={MAX_DEPTH_LIMIT}"
            )));
        }
        self.tree_params().validate()
    }
}

/// Bagged trees with per-split feature subsampling and soft voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

impl RandomForest {
    /// Mean of the member trees' leaf distributions.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let scale = 1.0 / self.trees.len() as f64;
        map_rows(x, self.n_classes, |row, out| {
            for t in &self.trees {
                t.add_proba(row, out);
            }
            out.iter_mut().for_each(|v| *v *= scale);
        })
    }
}

/// Fits a random forest. Tree `t` draws from its own stream derived from
/// `(seed, t)`, so results do not depend on evaluation order.
pub fn rf_fit(
    train: &Dataset,
    params: &ForestParams,
    weights: &ClassWeights,
    seed: u64,
) -> Result<RandomForest> {
    params.validate()?;
    let x = train.features().view();
    let y = train.labels();
    let k = train.n_classes();
    check_fit_inputs(x, y, weights.as_slice(), k)?;

    let n = y.len();
    let cols = Columns::new(x);
    let presorted = cols.presort();
    let tree_params = params.tree_params();
    let m = params.max_features.resolve(cols.n_features());

    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let mut rng = rng::substream(seed, t as u64);
        let counts: Vec<u32> = if params.bootstrap {
            let mut c = vec![0u32; n];
            for _ in 0..n {
                c[rng.random_range(0..n)] += 1;
            }
            c
        } else {
            vec![1; n]
        };
        let sorted: Vec<Vec<u32>> = presorted
            .iter()
            .map(|list| {
                list.iter()
                    .copied()
                    .filter(|&r| counts[r as usize] > 0)
                    .collect()
            })
            .collect();
        let tree = ClassTreeBuilder::new(
            &cols,
            y,
            k,
            weights.as_slice(),
            &counts,
            &tree_params,
            Some((m, &mut rng)),
        )
        .build(sorted);
        trees.push(DecisionTree {
            tree,
            n_classes: k,
            n_features: cols.n_features(),
        });
    }
    Ok(RandomForest {
        trees,
        n_classes: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::trees::dt_fit;

    fn data() -> Dataset {
        synth_generate(&SynthConfig {
            n_samples: 300,
            n_classes: 3,
            n_features: 5,
            power_law_exponent: 1.0,
            cluster_separation: 2.0,
            seed: 4,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let d = data();
        let w = ClassWeights::uniform(3);
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_features: MaxFeatures::Fraction(1.0),
            max_depth: 6,
            ..Default::default()
        };
        let forest = rf_fit(&d, &params, &w, 9).unwrap();
        let tree = dt_fit(&d, &params.tree_params(), &w, 9).unwrap();
        assert_eq!(forest.trees[0], tree);
        assert_eq!(
            forest.predict_proba(d.features().view()),
            tree.predict_proba(d.features().view())
        );
    }

    #[test]
    fn same_seed_same_forest() {
        let d = data();
        let w = ClassWeights::uniform(3);
        let params = ForestParams {
            n_estimators: 10,
            ..Default::default()
        };
        let a = rf_fit(&d, &params, &w, 1).unwrap();
        let b = rf_fit(&d, &params, &w, 1).unwrap();
        assert_eq!(
            a.predict_proba(d.features().view()),
            b.predict_proba(d.features().view())
        );
        let c = rf_fit(&d, &params, &w, 2).unwrap();
        assert_ne!(
            a.predict_proba(d.features().view()),
            c.predict_proba(d.features().view())
        );
    }

    #[test]
    fn probabilities_are_valid() {
        let d = data();
        let f = rf_fit(
            &d,
            &ForestParams {
                n_estimators: 7,
                ..Default::default()
            },
            &ClassWeights::uniform(3),
            0,
        )
        .unwrap();
        for row in f.predict_proba(d.features().view()).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(10), 3);
        assert_eq!(MaxFeatures::Log2.resolve(10), 3);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
        assert_eq!(MaxFeatures::Fraction(0.5).resolve(10), 5);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(10), 1);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let d = data();
        let w = ClassWeights::uniform(3);
        for p in [
            ForestParams {
                n_estimators: 0,
                ..Default::default()
            },
            ForestParams {
                max_features: MaxFeatures::Fraction(1.5),
                ..Default::default()
            },
            ForestParams {
                min_samples_split: 1,
                ..Default::default()
            },
        ] {
            assert!(rf_fit(&d, &p, &w, 0).is_err());
        }
    }
}
