//! Class-imbalance quantification.
//!
//! Three complementary views of a label distribution:
//!
//! * **CVCF**, the coefficient of variation of class frequencies,
//!   `σ_f / f̄` with the population standard deviation;
//! * **IR**, the imbalance ratio `max_k N_k / min_k N_k`;
//! * **NECD**, Shannon entropy of the frequencies divided by `ln K`
//!   (1 = uniform, 0 = one class holds everything).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class counts of a label vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    counts: Vec<usize>,
}

impl LabelDistribution {
    /// Distribution over exactly the given classes; zero counts are kept.
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid(
                "a label distribution needs at least two classes",
            ));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::invalid(
                "a label distribution needs at least one sample",
            ));
        }
        Ok(Self { counts })
    }

    /// Counts the labels; classes never observed do not enter `K`.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("empty label vector"));
        }
        let max = *labels.iter().max().expect("non-empty");
        let mut counts = vec![0usize; max + 1];
        for &y in labels {
            counts[y] += 1;
        }
        counts.retain(|&c| c > 0);
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn cvcf(&self) -> f64 {
        cvcf(self)
    }

    pub fn imbalance_ratio(&self) -> Result<f64> {
        imbalance_ratio(self)
    }

    pub fn necd(&self) -> f64 {
        necd(self)
    }

    pub fn report(&self) -> Result<ImbalanceReport> {
        Ok(ImbalanceReport {
            cvcf: self.cvcf(),
            ir: self.imbalance_ratio()?,
            necd: self.necd(),
        })
    }
}

/// The three imbalance metrics of one label distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub cvcf: f64,
    pub ir: f64,
    pub necd: f64,
}

/// Class frequencies of a label vector.
pub fn class_frequencies(labels: &[usize]) -> Result<LabelDistribution> {
    LabelDistribution::from_labels(labels)
}

pub fn cvcf(dist: &LabelDistribution) -> f64 {
    let f = dist.frequencies();
    let k = f.len() as f64;
    let mean = f.iter().sum::<f64>() / k;
    let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    var.sqrt() / mean
}

pub fn imbalance_ratio(dist: &LabelDistribution) -> Result<f64> {
    let counts = dist.counts();
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCount { class });
    }
    let max = *counts.iter().max().expect("K >= 2");
    let min = *counts.iter().min().expect("K >= 2");
    Ok(max as f64 / min as f64)
}

/// Normalized entropy in natural log; empty classes contribute nothing.
pub fn necd(dist: &LabelDistribution) -> f64 {
    let h: f64 = dist
        .frequencies()
        .iter()
        .filter(|&&f| f > 0.0)
        .map(|&f| -f * f.ln())
        .sum();
    h / (dist.n_classes() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn dist(c: &[usize]) -> LabelDistribution {
        LabelDistribution::from_counts(c.to_vec()).unwrap()
    }

    #[test]
    fn frequencies_from_labels() {
        let d = class_frequencies(&[0, 0, 1, 1]).unwrap();
        assert_eq!(d.counts(), &[2, 2]);
        assert_eq!(d.frequencies(), vec![0.5, 0.5]);
        assert_eq!(
            class_frequencies(&[0, 0, 0, 1]).unwrap().frequencies(),
            vec![0.75, 0.25]
        );
    }

    #[test]
    fn unobserved_classes_are_excluded() {
        let d = class_frequencies(&[0, 2, 2, 0, 2]).unwrap();
        assert_eq!(d.counts(), &[2, 3]);
    }

    #[test]
    fn empty_labels_are_an_error() {
        assert!(class_frequencies(&[]).is_err());
    }

    #[test]
    fn large_sample_tracks_prior() {
        let prior = [0.9, 0.09, 0.01];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<usize> = (0..45_000)
            .map(|_| {
                let u: f64 = rng.random();
                if u < 0.9 {
                    0
                } else if u < 0.99 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let f = class_frequencies(&labels).unwrap().frequencies();
        for (a, b) in f.iter().zip(prior) {
            assert!((a - b).abs() < 0.01);
        }
    }

    #[test]
    fn cvcf_examples() {
        assert_eq!(cvcf(&dist(&[50, 50, 50])), 0.0);
        assert_abs_diff_eq!(cvcf(&dist(&[75, 25])), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cvcf(&dist(&[90, 9, 1])), 1.2061, epsilon = 1e-4);
    }

    #[test]
    fn ir_examples() {
        assert_eq!(imbalance_ratio(&dist(&[50, 50])).unwrap(), 1.0);
        assert_eq!(imbalance_ratio(&dist(&[90, 9, 1])).unwrap(), 90.0);
        assert!(matches!(
            imbalance_ratio(&dist(&[90, 0])),
            Err(Error::ZeroCount { class: 1 })
        ));
    }

    #[test]
    fn necd_examples() {
        assert_abs_diff_eq!(necd(&dist(&[25, 25, 25, 25])), 1.0, epsilon = 1e-12);
        assert_eq!(necd(&dist(&[100, 0])), 0.0);
        assert_abs_diff_eq!(necd(&dist(&[99, 1])), 0.0808, epsilon = 1e-4);
    }

    #[test]
    fn two_class_family_is_monotone() {
        let n = 200;
        let mut prev: Option<(f64, f64, f64)> = None;
        for m in (1..=n / 2).rev() {
            let d = dist(&[n - m, m]);
            let cur = (d.imbalance_ratio().unwrap(), d.necd(), d.cvcf());
            if let Some((ir, ne, cv)) = prev {
                assert!(cur.0 > ir && cur.1 < ne && cur.2 > cv, "m = {m}");
            }
            prev = Some(cur);
        }
    }

    proptest! {
        #[test]
        fn scale_and_permutation_invariance(counts in prop::collection::vec(1usize..500, 2..8), scale in 2usize..20, rot in 0usize..8) {
            let d = dist(&counts);
            let scaled = dist(&counts.iter().map(|c| c * scale).collect::<Vec<_>>());
            let mut perm = counts.clone();
            let r = rot % perm.len();
            perm.rotate_left(r);
            perm.reverse();
            let p = dist(&perm);
            for other in [&scaled, &p] {
                prop_assert!((d.cvcf() - other.cvcf()).abs() < 1e-12);
                prop_assert_eq!(d.imbalance_ratio().unwrap(), other.imbalance_ratio().unwrap());
                prop_assert!((d.necd() - other.necd()).abs() < 1e-12);
            }
        }

        #[test]
        fn bounds(counts in prop::collection::vec(1usize..10_000, 2..12)) {
            let d = dist(&counts);
            let k = counts.len() as f64;
            prop_assert!(d.cvcf() >= 0.0 && d.cvcf() <= (k - 1.0).sqrt() + 1e-12);
            prop_assert!(d.imbalance_ratio().unwrap() >= 1.0);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d.necd()));
        }
    }
}
