use serde::{Deserialize, Serialize};

use super::registry::ClassifierSpec;
use crate::data::{stratified_split, Dataset, SplitFractions};
use crate::error::Result;
use crate::imbalance::LabelDistribution;
use crate::metrics::{confusion, f1_scores, recall};
use crate::model::{fit, Family};
use crate::weighting::{ClassWeights, WeightingStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockStatus {
    Ok,
    Skipped,
}

/// One classifier's outcome on one (target, threshold) block for one run.
///
/// Imbalance statistics describe the filtered training labels. Numeric
/// fields are empty for skipped rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub target: String,
    pub filter_threshold: usize,
    pub classifier: String,
    pub family: Family,
    pub weighting: WeightingStrategy,
    pub run: usize,
    pub seed: u64,
    pub status: BlockStatus,
    pub skip_reason: String,
    pub n_classes: Option<usize>,
    pub n_train_samples: Option<usize>,
    pub cvcf: Option<f64>,
    pub ir: Option<f64>,
    pub necd: Option<f64>,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub weighted_f1: Option<f64>,
    /// Recall of the smallest training class.
    pub minority_recall: Option<f64>,
    pub training_seconds: Option<f64>,
}

/// CSV column order of [`BlockResult`].
pub const RESULT_COLUMNS: [&str; 19] = [
    "target",
    "filter_threshold",
    "classifier",
    "family",
    "weighting",
    "run",
    "seed",
    "status",
    "skip_reason",
    "n_classes",
    "n_train_samples",
    "cvcf",
    "ir",
    "necd",
    "accuracy",
    "macro_f1",
    "weighted_f1",
    "minority_recall",
    "training_seconds",
];

impl BlockResult {
    /// Sort key: block, then classifier, then run.
    pub fn key(&self) -> (&str, usize, &str, usize) {
        (
            &self.target,
            self.filter_threshold,
            &self.classifier,
            self.run,
        )
    }

    pub fn block_id(&self) -> String {
        block_id(&self.target, self.filter_threshold)
    }

    pub fn is_ok(&self) -> bool {
        self.status == BlockStatus::Ok
    }
}

pub fn block_id(target: &str, threshold: usize) -> String {
    format!("{target}@{threshold}")
}

/// Fixed inputs of a block besides the classifier and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSettings {
    pub split: SplitFractions,
    pub beta: f64,
}

struct Measured {
    n_classes: usize,
    n_train: usize,
    cvcf: f64,
    ir: f64,
    necd: f64,
    accuracy: f64,
    macro_f1: f64,
    weighted_f1: f64,
    minority_recall: f64,
    seconds: f64,
}

fn measure(
    data: &Dataset,
    spec: &ClassifierSpec,
    threshold: usize,
    seed: u64,
    settings: &BlockSettings,
) -> Result<Measured> {
    let filtered = data.filter_min_class_count(threshold)?;
    let split = stratified_split(&filtered, settings.split, seed)?;
    let train = filtered.subset(&split.train);
    let validation = filtered.subset(&split.validation);
    let test = filtered.subset(&split.test);

    let counts = train.class_counts();
    let dist = LabelDistribution::from_counts(counts.clone())?;
    let report = dist.report()?;
    let weights = ClassWeights::compute(spec.weighting, &dist, settings.beta)?;

    let model = fit(&spec.params, &train, Some(&validation), &weights, seed)?;
    let pred = model.predict(test.features().view())?;
    let k = filtered.n_classes();
    let cm = confusion(test.labels(), &pred, k)?;
    let f1 = f1_scores(&cm);
    let minority = (0..k).min_by_key(|&c| (counts[c], c)).expect("k >= 2");
    Ok(Measured {
        n_classes: k,
        n_train: train.n_samples(),
        cvcf: report.cvcf,
        ir: report.ir,
        necd: report.necd,
        accuracy: crate::metrics::accuracy(&cm)?,
        macro_f1: f1.macro_f1,
        weighted_f1: f1.weighted_f1,
        minority_recall: recall(&cm, minority),
        seconds: model.training_seconds.max(1e-9),
    })
}

/// Filters `data` at `threshold`, splits it with `seed`, derives class
/// weights from the training part, fits and times the classifier, and
/// scores it on the test part. Any failure yields a skipped row.
pub fn run_block(
    data: &Dataset,
    target: &str,
    spec: &ClassifierSpec,
    threshold: usize,
    run: usize,
    seed: u64,
    settings: &BlockSettings,
) -> BlockResult {
    let mut row = BlockResult {
        target: target.to_string(),
        filter_threshold: threshold,
        classifier: spec.id.clone(),
        family: spec.family(),
        weighting: spec.weighting,
        run,
        seed,
        status: BlockStatus::Ok,
        skip_reason: String::new(),
        n_classes: None,
        n_train_samples: None,
        cvcf: None,
        ir: None,
        necd: None,
        accuracy: None,
        macro_f1: None,
        weighted_f1: None,
        minority_recall: None,
        training_seconds: None,
    };
    match measure(data, spec, threshold, seed, settings) {
        Ok(m) => {
            row.n_classes = Some(m.n_classes);
            row.n_train_samples = Some(m.n_train);
            row.cvcf = Some(m.cvcf);
            row.ir = Some(m.ir);
            row.necd = Some(m.necd);
            row.accuracy = Some(m.accuracy);
            row.macro_f1 = Some(m.macro_f1);
            row.weighted_f1 = Some(m.weighted_f1);
            row.minority_recall = Some(m.minority_recall);
            row.training_seconds = Some(m.seconds);
        }
        Err(e) => {
            log::warn!(
                "skipping {} at {}: {e}",
                spec.id,
                block_id(target, threshold)
            );
            row.status = BlockStatus::Skipped;
            row.skip_reason = e.to_string();
        }
    }
    row
}
