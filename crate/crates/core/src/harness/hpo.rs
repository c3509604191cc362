//! Seeded random hyperparameter search scored by stratified k-fold
//! weighted F1, with median pruning.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::imbalance::LabelDistribution;
use crate::metrics::evaluate;
use crate::model::{fit, ModelParams};
use crate::nn::{hidden_bounds, TabResNetParams};
use crate::rng::{self, Rng};
use crate::trees::{Criterion, ForestParams, GbtParams, MaxFeatures, TreeParams};
use crate::weighting::{ClassWeights, WeightingStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    const fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        rng.random_range(self.lo..=self.hi)
    }

    fn within(&self, bound: IntRange) -> bool {
        bound.lo <= self.lo && self.lo <= self.hi && self.hi <= bound.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatRange {
    pub lo: f64,
    pub hi: f64,
}

impl FloatRange {
    const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn uniform(&self, rng: &mut Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    fn log_uniform(&self, rng: &mut Rng) -> f64 {
        FloatRange::new(self.lo.ln(), self.hi.ln())
            .uniform(rng)
            .exp()
            .clamp(self.lo, self.hi)
    }

    fn within(&self, bound: FloatRange) -> bool {
        bound.lo <= self.lo && self.lo <= self.hi && self.hi <= bound.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtSpace {
    pub max_depth: IntRange,
    pub min_samples_split: IntRange,
    pub min_samples_leaf: IntRange,
}

impl Default for DtSpace {
    fn default() -> Self {
        Self {
            max_depth: IntRange::new(2, 32),
            min_samples_split: IntRange::new(2, 50),
            min_samples_leaf: IntRange::new(1, 20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfSpace {
    pub n_estimators: IntRange,
    pub max_depth: IntRange,
    pub min_samples_split: IntRange,
    pub min_samples_leaf: IntRange,
    /// Fixed fractions offered alongside `sqrt` and `log2`.
    pub feature_fractions: Vec<f64>,
}

impl Default for RfSpace {
    fn default() -> Self {
        Self {
            n_estimators: IntRange::new(100, 1000),
            max_depth: IntRange::new(3, 25),
            min_samples_split: IntRange::new(2, 50),
            min_samples_leaf: IntRange::new(1, 20),
            feature_fractions: vec![0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSpace {
    pub n_estimators: IntRange,
    /// Sampled log-uniformly.
    pub learning_rate: FloatRange,
    pub max_depth: IntRange,
    pub subsample: FloatRange,
    pub colsample: FloatRange,
    pub reg_alpha: FloatRange,
    pub reg_lambda: FloatRange,
}

impl Default for GbtSpace {
    fn default() -> Self {
        Self {
            n_estimators: IntRange::new(200, 1200),
            learning_rate: FloatRange::new(0.01, 0.3),
            max_depth: IntRange::new(3, 12),
            subsample: FloatRange::new(0.6, 1.0),
            colsample: FloatRange::new(0.5, 1.0),
            reg_alpha: FloatRange::new(0.0, 5.0),
            reg_lambda: FloatRange::new(0.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabResNetSpace {
    /// Sampled log-uniformly.
    pub learning_rate: FloatRange,
    /// Sampled log-uniformly.
    pub weight_decay: FloatRange,
    pub batch_sizes: Vec<usize>,
    pub n_blocks: IntRange,
}

impl Default for TabResNetSpace {
    fn default() -> Self {
        Self {
            learning_rate: FloatRange::new(1e-6, 1e-1),
            weight_decay: FloatRange::new(1e-7, 1e-2),
            batch_sizes: vec![32, 64, 128, 256, 512, 1024],
            n_blocks: IntRange::new(1, 4),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub dt: DtSpace,
    pub rf: RfSpace,
    pub gbt: GbtSpace,
    pub tabresnet: TabResNetSpace,
}

impl SearchSpace {
    /// Every range must be non-empty and inside the default bounds.
    pub fn validate(&self) -> Result<()> {
        let (d, r, g, t) = (
            DtSpace::default(),
            RfSpace::default(),
            GbtSpace::default(),
            TabResNetSpace::default(),
        );
        let ints = [
            (self.dt.max_depth, d.max_depth, "dt.max_depth"),
            (
                self.dt.min_samples_split,
                d.min_samples_split,
                "dt.min_samples_split",
            ),
            (
                self.dt.min_samples_leaf,
                d.min_samples_leaf,
                "dt.min_samples_leaf",
            ),
            (self.rf.n_estimators, r.n_estimators, "rf.n_estimators"),
            (self.rf.max_depth, r.max_depth, "rf.max_depth"),
            (
                self.rf.min_samples_split,
                r.min_samples_split,
                "rf.min_samples_split",
            ),
            (
                self.rf.min_samples_leaf,
                r.min_samples_leaf,
                "rf.min_samples_leaf",
            ),
            (self.gbt.n_estimators, g.n_estimators, "gbt.n_estimators"),
            (self.gbt.max_depth, g.max_depth, "gbt.max_depth"),
            (self.tabresnet.n_blocks, t.n_blocks, "tabresnet.n_blocks"),
        ];
        for (range, bound, name) in ints {
            if !range.within(bound) {
                return Err(Error::Config(format!(
                    "{name} must lie within {}..={}",
                    bound.lo, bound.hi
                )));
            }
        }
        let floats = [
            (self.gbt.learning_rate, g.learning_rate, "gbt.learning_rate"),
            (self.gbt.subsample, g.subsample, "gbt.subsample"),
            (self.gbt.colsample, g.colsample, "gbt.colsample"),
            (self.gbt.reg_alpha, g.reg_alpha, "gbt.reg_alpha"),
            (self.gbt.reg_lambda, g.reg_lambda, "gbt.reg_lambda"),
            (
                self.tabresnet.learning_rate,
                t.learning_rate,
                "tabresnet.learning_rate",
            ),
            (
                self.tabresnet.weight_decay,
                t.weight_decay,
                "tabresnet.weight_decay",
            ),
        ];
        for (range, bound, name) in floats {
            if !range.within(bound) {
                return Err(Error::Config(format!(
                    "{name} must lie within [{}, {}]",
                    bound.lo, bound.hi
                )));
            }
        }
        if self
            .rf
            .feature_fractions
            .iter()
            .any(|f| !(*f > 0.0 && *f <= 1.0))
        {
            return Err(Error::Config(
                "rf.feature_fractions must lie in (0, 1]".into(),
            ));
        }
        if self.tabresnet.batch_sizes.is_empty()
            || self
                .tabresnet
                .batch_sizes
                .iter()
                .any(|b| !(32..=1024).contains(b))
        {
            return Err(Error::Config(
                "tabresnet.batch_sizes must be non-empty and within 32..=1024".into(),
            ));
        }
        Ok(())
    }

    /// Draws one configuration; fields outside the search space come from `base`.
    pub fn sample(&self, base: &ModelParams, n_features: usize, rng: &mut Rng) -> ModelParams {
        match base {
            ModelParams::Dt(_) => ModelParams::Dt(TreeParams {
                max_depth: self.dt.max_depth.sample(rng),
                min_samples_split: self.dt.min_samples_split.sample(rng),
                min_samples_leaf: self.dt.min_samples_leaf.sample(rng),
                criterion: if rng.random_bool(0.5) {
                    Criterion::Gini
                } else {
                    Criterion::Entropy
                },
            }),
            ModelParams::Rf(b) => {
                let n_choices = 2 + self.rf.feature_fractions.len();
                let max_features = match rng.random_range(0..n_choices) {
                    0 => MaxFeatures::Sqrt,
                    1 => MaxFeatures::Log2,
                    i => MaxFeatures::Fraction(self.rf.feature_fractions[i - 2]),
                };
                ModelParams::Rf(ForestParams {
                    n_estimators: self.rf.n_estimators.sample(rng),
                    max_depth: self.rf.max_depth.sample(rng),
                    min_samples_split: self.rf.min_samples_split.sample(rng),
                    min_samples_leaf: self.rf.min_samples_leaf.sample(rng),
                    criterion: if rng.random_bool(0.5) {
                        Criterion::Gini
                    } else {
                        Criterion::Entropy
                    },
                    max_features,
                    ..b.clone()
                })
            }
            ModelParams::Gbt(_) => ModelParams::Gbt(GbtParams {
                n_estimators: self.gbt.n_estimators.sample(rng),
                learning_rate: self.gbt.learning_rate.log_uniform(rng),
                max_depth: self.gbt.max_depth.sample(rng),
                subsample: self.gbt.subsample.uniform(rng),
                colsample: self.gbt.colsample.uniform(rng),
                reg_alpha: self.gbt.reg_alpha.uniform(rng),
                reg_lambda: self.gbt.reg_lambda.uniform(rng),
            }),
            ModelParams::TabResNet(b) => {
                let (lo, hi) = hidden_bounds(n_features);
                let sizes = &self.tabresnet.batch_sizes;
                ModelParams::TabResNet(TabResNetParams {
                    learning_rate: self.tabresnet.learning_rate.log_uniform(rng),
                    weight_decay: self.tabresnet.weight_decay.log_uniform(rng),
                    batch_size: sizes[rng.random_range(0..sizes.len())],
                    n_blocks: self.tabresnet.n_blocks.sample(rng),
                    hidden_dim: Some(rng.random_range(lo..=hi)),
                    use_reduction: rng.random_bool(0.5),
                    ..b.clone()
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoSpec {
    pub n_trials: usize,
    pub cv_folds: usize,
    pub pruning: bool,
    /// Completed trials required before pruning starts.
    pub startup_trials: usize,
    pub seed: u64,
    pub space: SearchSpace,
}

impl Default for HpoSpec {
    fn default() -> Self {
        Self {
            n_trials: 25,
            cv_folds: 5,
            pruning: true,
            startup_trials: 5,
            seed: 42,
            space: SearchSpace::default(),
        }
    }
}

impl HpoSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        self.space.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Complete,
    Pruned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial<P> {
    pub index: usize,
    pub params: P,
    pub fold_scores: Vec<f64>,
    /// Mean over all folds; set only for complete trials.
    pub score: Option<f64>,
    pub status: TrialStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome<P> {
    pub best_index: usize,
    pub best_score: f64,
    pub best: P,
    pub trials: Vec<Trial<P>>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn trial_log<P: std::fmt::Debug>(trials: &[Trial<P>]) -> String {
    trials
        .iter()
        .map(|t| {
            format!(
                "trial {}: {:?} {}",
                t.index,
                t.status,
                t.message.as_deref().unwrap_or("")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Random search maximizing the mean fold score.
///
/// Trial `i` draws its parameters from substream `i` of `seed`. With
/// `pruning = Some(startup)`, once `startup` trials have completed, a trial
/// whose running mean after `c` folds is below the median of the completed
/// trials' running means after `c` folds is abandoned. Ties in the final
/// score go to the lowest trial index.
pub fn random_search<P: Clone + std::fmt::Debug>(
    n_trials: usize,
    n_folds: usize,
    pruning: Option<usize>,
    seed: u64,
    mut sample: impl FnMut(&mut Rng) -> P,
    mut score_fold: impl FnMut(&P, usize) -> Result<f64>,
) -> Result<SearchOutcome<P>> {
    let mut trials: Vec<Trial<P>> = Vec::with_capacity(n_trials);
    // running means of completed trials, indexed by fold count - 1
    let mut completed_prefix: Vec<Vec<f64>> = Vec::new();
    for index in 0..n_trials {
        let mut rng = rng::substream(seed, index as u64);
        let params = sample(&mut rng);
        let mut fold_scores = Vec::with_capacity(n_folds);
        let mut status = TrialStatus::Complete;
        let mut message = None;
        let mut prefix = Vec::with_capacity(n_folds);
        for fold in 0..n_folds {
            match score_fold(&params, fold) {
                Ok(s) if s.is_finite() => fold_scores.push(s),
                Ok(s) => {
                    status = TrialStatus::Failed;
                    message = Some(format!("fold {fold} scored {s}"));
                    break;
                }
                Err(e) => {
                    status = TrialStatus::Failed;
                    message = Some(format!("fold {fold}: {e}"));
                    break;
                }
            }
            let running = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            prefix.push(running);
            if let Some(startup) = pruning {
                if fold + 1 < n_folds && completed_prefix.len() >= startup.max(1) {
                    let mut at: Vec<f64> = completed_prefix.iter().map(|p| p[fold]).collect();
                    let m = median(&mut at);
                    if running < m {
                        status = TrialStatus::Pruned;
                        message = Some(format!(
                            "running mean {running:.4} below median {m:.4} after {} folds",
                            fold + 1
                        ));
                        break;
                    }
                }
            }
        }
        let score =
            (status == TrialStatus::Complete).then(|| *prefix.last().expect("at least one fold"));
        if status == TrialStatus::Complete {
            completed_prefix.push(prefix);
        }
        log::debug!("trial {index}: {status:?} score {score:?}");
        trials.push(Trial {
            index,
            params,
            fold_scores,
            score,
            status,
            message,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for t in &trials {
        if let Some(s) = t.score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((t.index, s));
            }
        }
    }
    match best {
        Some((best_index, best_score)) => Ok(SearchOutcome {
            best_index,
            best_score,
            best: trials[best_index].params.clone(),
            trials,
        }),
        None => Err(Error::AllTrialsFailed {
            trials: n_trials,
            log: trial_log(&trials),
        }),
    }
}

/// Tunes one classifier on `dev` by k-fold cross-validated weighted F1.
///
/// Class weights are computed once from the label distribution of `dev`. For
/// the network, the held-out fold also drives early stopping.
pub fn hpo_random_search(
    base: &ModelParams,
    weighting: WeightingStrategy,
    beta: f64,
    spec: &HpoSpec,
    dev: &Dataset,
    seed: u64,
) -> Result<SearchOutcome<ModelParams>> {
    spec.validate()?;
    let k = dev.n_classes();
    let dist = LabelDistribution::from_counts(dev.class_counts())?;
    let weights = ClassWeights::compute(weighting, &dist, beta)?;
    let folds = stratified_kfold(dev.labels(), k, spec.cv_folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = folds
        .iter()
        .map(|held| {
            let mut in_fold = vec![false; dev.n_samples()];
            for &i in held {
                in_fold[i] = true;
            }
            let train: Vec<usize> = (0..dev.n_samples()).filter(|&i| !in_fold[i]).collect();
            (dev.subset(&train), dev.subset(held))
        })
        .collect();
    let n_features = dev.n_features();
    random_search(
        spec.n_trials,
        spec.cv_folds,
        spec.pruning.then_some(spec.startup_trials),
        spec.seed ^ seed,
        |rng| spec.space.sample(base, n_features, rng),
        |params, fold| {
            let (train, held) = &splits[fold];
            let model = fit(
                params,
                train,
                Some(held),
                &weights,
                seed.wrapping_add(fold as u64),
            )?;
            let pred = model.predict(held.features().view())?;
            Ok(evaluate(held.labels(), &pred, k)?.weighted_f1)
        },
    )
}
