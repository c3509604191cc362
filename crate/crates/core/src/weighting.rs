//! Per-class weights derived from the training label distribution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imbalance::LabelDistribution;

/// Smoothing factor used by the effective-number scheme unless overridden.
pub const DEFAULT_BETA: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingStrategy {
    None,
    Inverse,
    Effective,
    Median,
}

impl WeightingStrategy {
    pub const ALL: [WeightingStrategy; 4] = [
        WeightingStrategy::None,
        WeightingStrategy::Inverse,
        WeightingStrategy::Effective,
        WeightingStrategy::Median,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            WeightingStrategy::None => "none",
            WeightingStrategy::Inverse => "inverse",
            WeightingStrategy::Effective => "effective",
            WeightingStrategy::Median => "median",
        }
    }
}

impl fmt::Display for WeightingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "inverse" => Ok(Self::Inverse),
            "effective" => Ok(Self::Effective),
            "median" => Ok(Self::Median),
            other => Err(Error::invalid(format!(
                "unknown weighting strategy '{other}'"
            ))),
        }
    }
}

/// Positive per-class weights, indexed by class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
    pub strategy: WeightingStrategy,
    pub beta: Option<f64>,
}

impl ClassWeights {
    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0; k],
            strategy: WeightingStrategy::None,
            beta: None,
        }
    }

    /// Weights of `strategy` for `dist`; `beta` only matters for the effective scheme.
    pub fn compute(
        strategy: WeightingStrategy,
        dist: &LabelDistribution,
        beta: f64,
    ) -> Result<Self> {
        match strategy {
            WeightingStrategy::None => Ok(Self::uniform(dist.n_classes())),
            WeightingStrategy::Inverse => weights_inverse(dist),
            WeightingStrategy::Effective => weights_effective(dist, beta),
            WeightingStrategy::Median => weights_median(dist),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Per-sample masses `w_{y_i}`.
    pub fn sample_weights(&self, labels: &[usize]) -> Vec<f64> {
        labels.iter().map(|&y| self.weights[y]).collect()
    }
}

fn require_positive(dist: &LabelDistribution) -> Result<()> {
    match dist.counts().iter().position(|&c| c == 0) {
        Some(class) => Err(Error::ZeroCount { class }),
        None => Ok(()),
    }
}

/// `w_k = N / (K N_k)`.
pub fn weights_inverse(dist: &LabelDistribution) -> Result<ClassWeights> {
    require_positive(dist)?;
    let n = dist.total() as f64;
    let k = dist.n_classes() as f64;
    Ok(ClassWeights {
        weights: dist.counts().iter().map(|&c| n / (k * c as f64)).collect(),
        strategy: WeightingStrategy::Inverse,
        beta: None,
    })
}

/// Effective number of samples, `N_k^eff = (1 - β^{N_k}) / (1 - β)`, with
/// weights `(1 / N_k^eff) · (Σ_j N_j^eff) / K`.
pub fn weights_effective(dist: &LabelDistribution, beta: f64) -> Result<ClassWeights> {
    require_positive(dist)?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!(
            "beta must lie in [0, 1), got {beta}; use the inverse scheme for the beta -> 1 limit"
        )));
    }
    // expm1/ln_1p keep precision when beta is within 1e-9 of 1
    let effective: Vec<f64> = if beta == 0.0 {
        vec![1.0; dist.n_classes()]
    } else {
        let log_beta = (-(1.0 - beta)).ln_1p();
        dist.counts()
            .iter()
            .map(|&c| -(c as f64 * log_beta).exp_m1() / (1.0 - beta))
            .collect()
    };
    let k = dist.n_classes() as f64;
    let mean = effective.iter().sum::<f64>() / k;
    Ok(ClassWeights {
        weights: effective.iter().map(|e| mean / e).collect(),
        strategy: WeightingStrategy::Effective,
        beta: Some(beta),
    })
}

/// `w_k = median(f) / f_k`; for even `K` the median is the mean of the two middle values.
pub fn weights_median(dist: &LabelDistribution) -> Result<ClassWeights> {
    require_positive(dist)?;
    let f = dist.frequencies();
    let mut sorted = f.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    Ok(ClassWeights {
        weights: f.iter().map(|fk| median / fk).collect(),
        strategy: WeightingStrategy::Median,
        beta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dist(c: &[usize]) -> LabelDistribution {
        LabelDistribution::from_counts(c.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn inverse_examples() {
        close(
            &weights_inverse(&dist(&[50, 50])).unwrap().weights,
            &[1.0, 1.0],
            1e-12,
        );
        close(
            &weights_inverse(&dist(&[90, 10])).unwrap().weights,
            &[0.5556, 5.0],
            1e-4,
        );
        let d = dist(&[90, 9, 1]);
        let w = weights_inverse(&d).unwrap();
        let mass: f64 = w
            .weights
            .iter()
            .zip(d.counts())
            .map(|(w, &c)| w * c as f64)
            .sum();
        assert_abs_diff_eq!(mass, 100.0, epsilon = 1e-9 * 100.0);
    }

    #[test]
    fn effective_examples() {
        close(
            &weights_effective(&dist(&[700, 3, 45]), 0.0)
                .unwrap()
                .weights,
            &[1.0; 3],
            1e-15,
        );
        close(
            &weights_effective(&dist(&[9000, 1000]), 0.9999)
                .unwrap()
                .weights,
            &[0.580, 3.618],
            1e-3,
        );
        let near = weights_effective(&dist(&[90, 10]), 1.0 - 1e-9).unwrap();
        let inv = weights_inverse(&dist(&[90, 10])).unwrap();
        for (a, b) in near.weights.iter().zip(&inv.weights) {
            assert!(((a - b) / b).abs() < 1e-3);
        }
    }

    #[test]
    fn effective_rejects_beta_one() {
        assert!(weights_effective(&dist(&[5, 5]), 1.0).is_err());
        assert!(weights_effective(&dist(&[5, 5]), -0.1).is_err());
    }

    #[test]
    fn median_examples() {
        close(
            &weights_median(&dist(&[40, 40, 40])).unwrap().weights,
            &[1.0; 3],
            1e-12,
        );
        close(
            &weights_median(&dist(&[50, 30, 20])).unwrap().weights,
            &[0.6, 1.0, 1.5],
            1e-12,
        );
        close(
            &weights_median(&dist(&[70, 30])).unwrap().weights,
            &[0.7143, 1.6667],
            1e-4,
        );
    }

    #[test]
    fn zero_counts_are_rejected() {
        let d = dist(&[10, 0]);
        assert!(weights_inverse(&d).is_err());
        assert!(weights_effective(&d, 0.9).is_err());
        assert!(weights_median(&d).is_err());
    }

    #[test]
    fn effective_is_not_scale_invariant() {
        let a = weights_effective(&dist(&[900, 100]), DEFAULT_BETA).unwrap();
        let b = weights_effective(&dist(&[1800, 200]), DEFAULT_BETA).unwrap();
        assert!((a.weights[1] - b.weights[1]).abs() > 1e-6);
    }

    #[test]
    fn none_is_all_ones() {
        let w = ClassWeights::compute(WeightingStrategy::None, &dist(&[9, 1, 3]), DEFAULT_BETA)
            .unwrap();
        assert_eq!(w.weights, vec![1.0; 3]);
    }

    proptest! {
        #[test]
        fn inverse_mass_identity(counts in prop::collection::vec(1usize..10_000, 2..10)) {
            let d = dist(&counts);
            let w = weights_inverse(&d).unwrap();
            let n = d.total() as f64;
            let mass: f64 = w.weights.iter().zip(&counts).map(|(w, &c)| w * c as f64).sum();
            prop_assert!(((mass - n) / n).abs() < 1e-9);
        }

        #[test]
        fn effective_decreasing_in_count(counts in prop::collection::btree_set(1usize..20_000, 2..8), beta in 0.5f64..0.99999) {
            let counts: Vec<usize> = counts.into_iter().collect();
            let w = weights_effective(&dist(&counts), beta).unwrap();
            for pair in w.weights.windows(2) {
                // beta^N underflows for large N, so equal weights are allowed.
                prop_assert!(pair[1] <= pair[0]);
            }
        }

        #[test]
        fn median_of_odd_k_gets_unit_weight(counts in prop::collection::btree_set(1usize..5000, 3..4)) {
            let counts: Vec<usize> = counts.into_iter().collect();
            let w = weights_median(&dist(&counts)).unwrap();
            prop_assert!((w.weights[1] - 1.0).abs() < 1e-12);
        }

        #[test]
        fn permutation_equivariance(counts in prop::collection::vec(1usize..3000, 2..7), rot in 0usize..7) {
            let r = rot % counts.len();
            let mut perm = counts.clone();
            perm.rotate_left(r);
            for s in WeightingStrategy::ALL {
                let a = ClassWeights::compute(s, &dist(&counts), DEFAULT_BETA).unwrap().weights;
                let mut b = ClassWeights::compute(s, &dist(&perm), DEFAULT_BETA).unwrap().weights;
                b.rotate_right(r);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
        }

        #[test]
        fn inverse_and_median_scale_invariant(counts in prop::collection::vec(1usize..3000, 2..7), s in 2usize..9) {
            let scaled: Vec<usize> = counts.iter().map(|c| c * s).collect();
            for f in [weights_inverse as fn(&LabelDistribution) -> Result<ClassWeights>, weights_median] {
                let a = f(&dist(&counts)).unwrap().weights;
                let b = f(&dist(&scaled)).unwrap().weights;
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
        }
    }
}
