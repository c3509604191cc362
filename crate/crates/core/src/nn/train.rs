use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{TabResNetConfig, TabResNetParams};
use super::network::TabResNet;
use super::optim::AdamW;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{argmax_rows, evaluate};
use crate::rng;
use crate::weighting::ClassWeights;

/// A validation score must beat the best so far by more than this to count.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochOutcome {
    Improved,
    Stalled { lr_reduced: bool, stop: bool },
}

/// Early-stopping and learning-rate plateau bookkeeping over a validation
/// score that should increase.
#[derive(Debug, Clone)]
pub struct PlateauTracker {
    learning_rate: f64,
    lr_factor: f64,
    patience: usize,
    lr_patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since_best: usize,
    since_lr_change: usize,
}

impl PlateauTracker {
    pub fn new(learning_rate: f64, lr_factor: f64, patience: usize, lr_patience: usize) -> Self {
        Self {
            learning_rate,
            lr_factor,
            patience,
            lr_patience,
            best: f64::NEG_INFINITY,
            best_epoch: None,
            since_best: 0,
            since_lr_change: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> EpochOutcome {
        if score > self.best + MIN_IMPROVEMENT {
            self.best = score;
            self.best_epoch = Some(epoch);
            self.since_best = 0;
            self.since_lr_change = 0;
            return EpochOutcome::Improved;
        }
        self.since_best += 1;
        self.since_lr_change += 1;
        let lr_reduced = self.since_lr_change >= self.lr_patience;
        if lr_reduced {
            self.learning_rate *= self.lr_factor;
            self.since_lr_change = 0;
        }
        EpochOutcome::Stalled {
            lr_reduced,
            stop: self.since_best >= self.patience,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_score(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_weighted_f1: f64,
    /// Rate used during this epoch.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTabResNet {
    pub network: TabResNet,
    pub history: TrainingHistory,
}

/// Minibatch boundaries over a shuffled order; a trailing batch of one sample
/// is dropped because batch statistics need two rows.
fn batches(n: usize, size: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n)
        .step_by(size)
        .map(move |s| s..(s + size).min(n))
        .filter(|r| r.len() >= 2)
}

fn validation_f1(net: &TabResNet, val: &Dataset) -> Result<f64> {
    let p = net.predict_proba(val.features().view())?;
    Ok(evaluate(val.labels(), &argmax_rows(p.view()), val.n_classes())?.weighted_f1)
}

/// Trains a freshly initialized network with AdamW on the class-weighted
/// cross-entropy, tracking validation weighted F1 after every epoch. The
/// parameters from the best validation epoch are restored at the end.
pub fn train(
    train: &Dataset,
    validation: &Dataset,
    weights: &ClassWeights,
    params: &TabResNetParams,
    seed: u64,
) -> Result<FittedTabResNet> {
    let cfg = TabResNetConfig::resolve(train.n_features(), train.n_classes(), params, seed)?;
    let net = TabResNet::build(&cfg)?;
    train_network(net, train, validation, weights, params, seed)
}

/// As [`train`], starting from a given network.
pub fn train_network(
    mut net: TabResNet,
    train: &Dataset,
    validation: &Dataset,
    weights: &ClassWeights,
    params: &TabResNetParams,
    seed: u64,
) -> Result<FittedTabResNet> {
    params.validate()?;
    let w = weights.as_slice();
    if w.len() != train.n_classes() {
        return Err(Error::Shape(format!(
            "{} classes but {} class weights",
            train.n_classes(),
            w.len()
        )));
    }
    if train.n_samples() < 2 {
        return Err(Error::invalid("training needs at least two samples"));
    }
    if validation.n_samples() == 0 {
        return Err(Error::invalid("empty validation set"));
    }
    if validation.n_features() != train.n_features() {
        return Err(Error::Shape(
            "train and validation feature widths differ".into(),
        ));
    }

    let mut shuffle_rng = rng::substream(seed, 1);
    let mut dropout_rng = rng::substream(seed, 2);
    let mut opt = AdamW::new(&net, params.learning_rate, params.weight_decay);
    let mut tracker = PlateauTracker::new(
        params.learning_rate,
        params.lr_factor,
        params.patience,
        params.lr_patience,
    );
    let mut order: Vec<usize> = (0..train.n_samples()).collect();
    let mut best = net.clone();
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = tracker.learning_rate();
        opt.learning_rate = lr;
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, range) in batches(order.len(), params.batch_size).enumerate() {
            let idx = &order[range];
            let x = train.features().select(Axis(0), idx);
            let y: Vec<usize> = idx.iter().map(|&i| train.labels()[i]).collect();
            let (loss, grads) = net.train_step_gradients(x.view(), &y, w, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b + 1,
                    learning_rate: lr,
                });
            }
            opt.step(&mut net, &grads);
            loss_sum += loss * y.len() as f64;
            seen += y.len();
        }
        let f1 = validation_f1(&net, validation)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            validation_weighted_f1: f1,
            learning_rate: lr,
        });
        match tracker.observe(epoch, f1) {
            EpochOutcome::Improved => best = net.clone(),
            EpochOutcome::Stalled { stop: true, .. } => {
                stopped_early = true;
                break;
            }
            EpochOutcome::Stalled { .. } => {}
        }
    }

    Ok(FittedTabResNet {
        network: best,
        history: TrainingHistory {
            epochs,
            best_epoch: tracker.best_epoch().unwrap_or(0),
            stopped_early,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_drop_a_single_trailing_row() {
        assert_eq!(batches(10, 4).collect::<Vec<_>>(), vec![0..4, 4..8, 8..10]);
        assert_eq!(batches(9, 4).collect::<Vec<_>>(), vec![0..4, 4..8]);
        assert_eq!(batches(3, 8).collect::<Vec<_>>(), vec![0..3]);
    }

    #[test]
    fn stops_patience_epochs_after_peak() {
        let peak = 7;
        let mut t = PlateauTracker::new(1e-3, 0.5, 15, 3);
        let mut stopped = None;
        for epoch in 1..=100 {
            let score = if epoch <= peak {
                epoch as f64 / 10.0
            } else {
                0.7 - (epoch - peak) as f64 / 100.0
            };
            if let EpochOutcome::Stalled { stop: true, .. } = t.observe(epoch, score) {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(peak + 15));
        assert_eq!(t.best_epoch(), Some(peak));
    }

    #[test]
    fn three_stalled_epochs_halve_the_rate() {
        let mut t = PlateauTracker::new(0.01, 0.5, 15, 3);
        t.observe(1, 0.5);
        for epoch in 2..=3 {
            assert_eq!(
                t.observe(epoch, 0.5),
                EpochOutcome::Stalled {
                    lr_reduced: false,
                    stop: false
                }
            );
            assert_eq!(t.learning_rate(), 0.01);
        }
        assert_eq!(
            t.observe(4, 0.5),
            EpochOutcome::Stalled {
                lr_reduced: true,
                stop: false
            }
        );
        assert_eq!(t.learning_rate(), 0.005);
    }

    #[test]
    fn improvement_must_exceed_threshold() {
        let mut t = PlateauTracker::new(0.01, 0.5, 15, 3);
        t.observe(1, 0.5);
        assert!(matches!(
            t.observe(2, 0.5 + 5e-7),
            EpochOutcome::Stalled { .. }
        ));
        assert_eq!(t.observe(3, 0.5 + 2e-6), EpochOutcome::Improved);
        assert_eq!(t.best_epoch(), Some(3));
    }
}
