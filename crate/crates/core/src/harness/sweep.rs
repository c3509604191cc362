use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::block::{run_block, BlockResult, BlockSettings};
use super::config::ExperimentConfig;
use super::hpo::hpo_random_search;
use super::registry::{ClassifierSpec, Registry};
use crate::data::{stratified_split, Dataset};
use crate::error::{Error, Result};

/// Mean and sample standard deviation of one metric over the runs of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `None` for an empty sample; std is 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

/// Aggregate of one classifier on one block over its completed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub target: String,
    pub filter_threshold: usize,
    pub classifier: String,
    pub n_runs: usize,
    pub n_ok: usize,
    pub cvcf: Option<f64>,
    pub ir: Option<f64>,
    pub necd: Option<f64>,
    pub accuracy: Option<MeanStd>,
    pub macro_f1: Option<MeanStd>,
    pub weighted_f1: Option<MeanStd>,
    pub minority_recall: Option<MeanStd>,
    pub training_seconds: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Sorted by (target, threshold, classifier, run).
    pub results: Vec<BlockResult>,
    /// One row per (target, threshold, classifier), in the same order.
    pub summary: Vec<SummaryRow>,
    /// Tuned parameters keyed by (classifier, threshold); threshold is
    /// `None` when tuning happened once per target.
    pub tuned: Vec<(String, Option<usize>, crate::model::ModelParams)>,
}

fn collect(rows: &[BlockResult], f: impl Fn(&BlockResult) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter(|r| r.is_ok()).filter_map(f).collect()
}

/// Groups sorted-or-unsorted rows by (target, threshold, classifier).
pub fn summarize(rows: &[BlockResult]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(&str, usize, &str), Vec<BlockResult>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((&r.target, r.filter_threshold, &r.classifier))
            .or_default()
            .push(r.clone());
    }
    cells
        .into_iter()
        .map(|((target, threshold, classifier), cell)| {
            let mean = |f: fn(&BlockResult) -> Option<f64>| {
                MeanStd::of(&collect(&cell, f)).map(|m| m.mean)
            };
            SummaryRow {
                target: target.to_string(),
                filter_threshold: threshold,
                classifier: classifier.to_string(),
                n_runs: cell.len(),
                n_ok: cell.iter().filter(|r| r.is_ok()).count(),
                cvcf: mean(|r| r.cvcf),
                ir: mean(|r| r.ir),
                necd: mean(|r| r.necd),
                accuracy: MeanStd::of(&collect(&cell, |r| r.accuracy)),
                macro_f1: MeanStd::of(&collect(&cell, |r| r.macro_f1)),
                weighted_f1: MeanStd::of(&collect(&cell, |r| r.weighted_f1)),
                minority_recall: MeanStd::of(&collect(&cell, |r| r.minority_recall)),
                training_seconds: MeanStd::of(&collect(&cell, |r| r.training_seconds)),
            }
        })
        .collect()
}

/// Loads the configured data source and runs the full grid.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let data = cfg.source.load()?;
    let registry = Registry::grid(&cfg.families, &cfg.strategies, &cfg.params);
    run_sweep_with(cfg, &data, &registry)
}

fn tune(
    cfg: &ExperimentConfig,
    data: &Dataset,
    spec: &ClassifierSpec,
    threshold: usize,
) -> Result<crate::model::ModelParams> {
    let filtered = data.filter_min_class_count(threshold)?;
    let split = stratified_split(&filtered, cfg.split, cfg.base_seed)?;
    let mut dev_idx = split.train;
    dev_idx.extend(split.validation);
    dev_idx.sort_unstable();
    let dev = filtered.subset(&dev_idx);
    let out = hpo_random_search(
        &spec.params,
        spec.weighting,
        cfg.beta,
        &cfg.hpo.search,
        &dev,
        cfg.base_seed,
    )?;
    log::info!(
        "tuned {} at threshold {threshold}: mean F1 {:.4}",
        spec.id,
        out.best_score
    );
    Ok(out.best)
}

/// Runs thresholds x classifiers x runs on `data`. Run `r` uses seed
/// `base_seed + r`; failed blocks become skipped rows.
pub fn run_sweep_with(
    cfg: &ExperimentConfig,
    data: &Dataset,
    registry: &Registry,
) -> Result<SweepOutput> {
    cfg.validate()?;
    if registry.is_empty() {
        return Err(Error::Config("no classifiers to run".into()));
    }
    let thresholds = cfg.thresholds_for(data);
    if thresholds.is_empty() {
        return Err(Error::Config("no usable filter thresholds".into()));
    }
    let settings = BlockSettings {
        split: cfg.split,
        beta: cfg.beta,
    };
    let threads = if cfg.sequential_timing {
        1
    } else {
        cfg.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    // (spec index, threshold or None) -> spec used for that cell
    let mut tuned = Vec::new();
    let mut per_cell: BTreeMap<(usize, usize), ClassifierSpec> = BTreeMap::new();
    for (si, spec) in registry.specs().iter().enumerate() {
        if !cfg.hpo.enabled {
            for &t in &thresholds {
                per_cell.insert((si, t), spec.clone());
            }
            continue;
        }
        let tune_at: Vec<Option<usize>> = if cfg.hpo.retune_per_threshold {
            thresholds.iter().map(|&t| Some(t)).collect()
        } else {
            vec![None]
        };
        for at in tune_at {
            let threshold = at.unwrap_or(thresholds[0]);
            let mut s = spec.clone();
            match pool.install(|| tune(cfg, data, spec, threshold)) {
                Ok(p) => {
                    s.params = p.clone();
                    tuned.push((spec.id.clone(), at, p));
                }
                Err(e) => log::warn!("tuning {} failed, keeping base parameters: {e}", spec.id),
            }
            match at {
                Some(t) => {
                    per_cell.insert((si, t), s);
                }
                None => {
                    for &t in &thresholds {
                        per_cell.insert((si, t), s.clone());
                    }
                }
            }
        }
    }

    let jobs: Vec<(&ClassifierSpec, usize, usize)> = per_cell
        .iter()
        .flat_map(|(&(_, t), spec)| (0..cfg.n_runs).map(move |r| (spec, t, r)))
        .collect();
    let mut results: Vec<BlockResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, t, r)| {
                run_block(
                    data,
                    &cfg.target,
                    spec,
                    t,
                    r,
                    cfg.base_seed.wrapping_add(r as u64),
                    &settings,
                )
            })
            .collect()
    });
    results.sort_by(|a, b| a.key().cmp(&b.key()));
    let summary = summarize(&results);
    Ok(SweepOutput {
        results,
        summary,
        tuned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[0.7]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_none());
    }
}
