use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the Gaussian-cluster generator.
///
/// Class sizes are either given explicitly (`class_counts`) or follow a power
/// law, `N_k ∝ (k + 1)^(-power_law_exponent)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_features: usize,
    #[serde(default)]
    pub class_counts: Option<Vec<usize>>,
    #[serde(default)]
    pub power_law_exponent: f64,
    #[serde(default = "default_separation")]
    pub cluster_separation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_separation() -> f64 {
    3.0
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_classes: 2,
            n_features: 4,
            class_counts: None,
            power_law_exponent: 0.0,
            cluster_separation: default_separation(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid("n_classes must be at least 2"));
        }
        if self.n_features == 0 {
            return Err(Error::invalid("n_features must be at least 1"));
        }
        if self.n_samples < self.n_classes {
            return Err(Error::invalid("n_samples must be at least n_classes"));
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return Err(Error::invalid("cluster_separation must be positive"));
        }
        if !(self.power_law_exponent >= 0.0 && self.power_law_exponent.is_finite()) {
            return Err(Error::invalid("power_law_exponent must be >= 0"));
        }
        if let Some(counts) = &self.class_counts {
            if counts.len() != self.n_classes {
                return Err(Error::invalid("class_counts length must equal n_classes"));
            }
            if counts.contains(&0) {
                return Err(Error::invalid("class_counts must all be >= 1"));
            }
            if counts.iter().sum::<usize>() != self.n_samples {
                return Err(Error::invalid("class_counts must sum to n_samples"));
            }
        }
        Ok(())
    }
}

/// Power-law class sizes summing to `n`, each at least 1.
///
/// The largest class is rounded up and the smallest rounded down, and the
/// classes in between share the remainder by largest remainder. Both extremes
/// are monotone in the exponent, so the resulting imbalance ratio never
/// decreases as the exponent grows.
pub fn synth_class_counts(n: usize, k: usize, exponent: f64) -> Vec<usize> {
    assert!(k >= 2 && n >= k, "need n >= k >= 2");
    let raw: Vec<f64> = (0..k).map(|i| ((i + 1) as f64).powf(-exponent)).collect();
    let z: f64 = raw.iter().sum();
    let share: Vec<f64> = raw.iter().map(|r| r / z * n as f64).collect();

    let mut counts = vec![0usize; k];
    counts[k - 1] = (share[k - 1].floor() as usize).max(1);
    if k == 2 {
        counts[0] = n - counts[1];
        return counts;
    }
    counts[0] = (share[0].ceil() as usize).min(n - counts[k - 1] - (k - 2));

    let rest = n - counts[0] - counts[k - 1];
    let middle_total: f64 = share[1..k - 1].iter().sum();
    let exact: Vec<f64> = share[1..k - 1]
        .iter()
        .map(|s| s / middle_total * rest as f64)
        .collect();
    let mut mid: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = rest - mid.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..mid.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        mid[i] += 1;
        left -= 1;
    }
    // floor empty classes at one, taking the sample from the largest middle class
    for i in 0..mid.len() {
        if mid[i] == 0 {
            let donor = (0..mid.len())
                .max_by_key(|&j| (mid[j], std::cmp::Reverse(j)))
                .expect("non-empty");
            if mid[donor] > 1 {
                mid[donor] -= 1;
            } else {
                counts[0] -= 1;
            }
            mid[i] = 1;
        }
    }
    counts[1..k - 1].copy_from_slice(&mid);
    counts
}

/// Unit-length class directions; orthonormal whenever `d >= k`.
fn class_directions(k: usize, d: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(k);
    while dirs.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if d >= k {
            for u in &dirs {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        dirs.push(v);
    }
    dirs
}

/// Draws an isotropic Gaussian cluster per class, unit variance per feature,
/// with class `k`'s mean at distance `cluster_separation` from the origin.
/// Rows are emitted class by class.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (k, d) = (cfg.n_classes, cfg.n_features);
    let counts = match &cfg.class_counts {
        Some(c) => c.clone(),
        None => synth_class_counts(cfg.n_samples, k, cfg.power_law_exponent),
    };
    let mut rng = rng::seeded(cfg.seed);
    let dirs = class_directions(k, d, &mut rng);

    let mut features = Array2::zeros((cfg.n_samples, d));
    let mut labels = Vec::with_capacity(cfg.n_samples);
    let mut row = 0;
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            for j in 0..d {
                let noise: f64 = rng.sample(StandardNormal);
                features[[row, j]] = cfg.cluster_separation * dirs[class][j] + noise;
            }
            labels.push(class);
            row += 1;
        }
    }
    Dataset::from_parts(features, labels, k)
}
