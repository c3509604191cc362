use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ranks::{midranks, tie_groups};
use crate::error::{Error, Result};

/// Largest number of nonzero differences for which `Auto` enumerates.
pub const EXACT_MAX_N: usize = 12;
/// Hard limit for explicit exact mode; pattern counts must fit in `u64`.
pub const EXACT_LIMIT: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMode {
    /// Exact when at most [`EXACT_MAX_N`] nonzero differences remain.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)` over midranks of the nonzero absolute differences.
    pub statistic: f64,
    pub p_value: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are discarded. The exact p-value counts the sign
/// patterns whose statistic is at most the observed one; ties are handled by
/// enumerating over doubled (integer) midranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], mode: PValueMode) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "{} vs {} paired values",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite paired difference"));
    }
    if diffs.is_empty() {
        return Err(Error::DegeneratePairing);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let plus2: u64 = doubled
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total2: u64 = doubled.iter().sum();
    let stat2 = plus2.min(total2 - plus2);
    let statistic = stat2 as f64 / 2.0;

    let exact = match mode {
        PValueMode::Auto => n <= EXACT_MAX_N,
        PValueMode::Exact => {
            if n > EXACT_LIMIT {
                return Err(Error::invalid(format!(
                    "exact mode supports at most {EXACT_LIMIT} differences"
                )));
            }
            true
        }
        PValueMode::Normal => false,
    };
    let p_value = if exact {
        exact_p(&doubled, stat2)
    } else {
        normal_p(n, statistic, &abs)
    };
    Ok(WilcoxonResult {
        statistic,
        p_value,
        n,
        exact,
    })
}

/// `P(min(W+, W-) <= observed)` under random signs, from the distribution of
/// the doubled positive-rank sum.
fn exact_p(doubled: &[u64], observed2: u64) -> f64 {
    let total = doubled.iter().sum::<u64>() as usize;
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - *s) as u64 <= observed2)
        .map(|(_, c)| c)
        .sum();
    (hits as f64 / (doubled.len() as f64).exp2()).min(1.0)
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction toward the mean.
fn normal_p(n: usize, statistic: f64, abs: &[f64]) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_groups(abs)
        .iter()
        .map(|&t| (t as f64).powi(3) - t as f64)
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}
