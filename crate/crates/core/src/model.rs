//! Uniform interface over the four model families.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::argmax_rows;
use crate::nn::{self, FittedTabResNet, TabResNetParams};
use crate::trees::{
    dt_fit, gbt_fit, rf_fit, DecisionTree, ForestParams, GbtParams, GradientBoostedTrees,
    RandomForest, TreeParams,
};
use crate::weighting::ClassWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dt,
    Rf,
    Gbt,
    #[serde(rename = "tabresnet")]
    TabResNet,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Dt, Family::Rf, Family::Gbt, Family::TabResNet];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Gbt => "gbt",
            Family::TabResNet => "tabresnet",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Family::Dt),
            "rf" => Ok(Family::Rf),
            "gbt" => Ok(Family::Gbt),
            "tabresnet" => Ok(Family::TabResNet),
            other => Err(Error::invalid(format!("unknown model family '{other}'"))),
        }
    }
}

/// Hyperparameters of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Dt(TreeParams),
    Rf(ForestParams),
    Gbt(GbtParams),
    #[serde(rename = "tabresnet")]
    TabResNet(TabResNetParams),
}

impl ModelParams {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Dt => ModelParams::Dt(TreeParams::default()),
            Family::Rf => ModelParams::Rf(ForestParams::default()),
            Family::Gbt => ModelParams::Gbt(GbtParams::default()),
            Family::TabResNet => ModelParams::TabResNet(TabResNetParams::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelParams::Dt(_) => Family::Dt,
            ModelParams::Rf(_) => Family::Rf,
            ModelParams::Gbt(_) => Family::Gbt,
            ModelParams::TabResNet(_) => Family::TabResNet,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Dt(p) => p.validate(),
            ModelParams::Rf(p) => p.validate(),
            ModelParams::Gbt(p) => p.validate(),
            ModelParams::TabResNet(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum FittedModel {
    Dt(DecisionTree),
    Rf(RandomForest),
    Gbt(GradientBoostedTrees),
    #[serde(rename = "tabresnet")]
    TabResNet(Box<FittedTabResNet>),
}

/// A fitted model plus the metadata recorded while fitting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub params: ModelParams,
    /// Wall-clock seconds spent inside the family's fit routine.
    pub training_seconds: f64,
    pub n_features: usize,
    pub n_classes: usize,
    pub model: FittedModel,
}

/// Fits one model. `validation` drives early stopping for the network and
/// is ignored by the tree families.
pub fn fit(
    params: &ModelParams,
    train: &Dataset,
    validation: Option<&Dataset>,
    weights: &ClassWeights,
    seed: u64,
) -> Result<TrainedModel> {
    params.validate()?;
    let start = Instant::now();
    let model = match params {
        ModelParams::Dt(p) => FittedModel::Dt(dt_fit(train, p, weights, seed)?),
        ModelParams::Rf(p) => FittedModel::Rf(rf_fit(train, p, weights, seed)?),
        ModelParams::Gbt(p) => FittedModel::Gbt(gbt_fit(train, p, weights, seed)?),
        ModelParams::TabResNet(p) => {
            let val =
                validation.ok_or_else(|| Error::invalid("the network needs a validation set"))?;
            FittedModel::TabResNet(Box::new(nn::train(train, val, weights, p, seed)?))
        }
    };
    let training_seconds = start.elapsed().as_secs_f64();
    Ok(TrainedModel {
        family: params.family(),
        params: params.clone(),
        training_seconds,
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        model,
    })
}

impl TrainedModel {
    /// `N x K` class probabilities; every row sums to 1.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(match &self.model {
            FittedModel::Dt(m) => m.predict_proba(x),
            FittedModel::Rf(m) => m.predict_proba(x),
            FittedModel::Gbt(m) => m.predict_proba(x),
            FittedModel::TabResNet(m) => {
                if x.nrows() == 0 {
                    Array2::zeros((0, self.n_classes))
                } else {
                    m.network.predict_proba(x)?
                }
            }
        })
    }

    /// Most probable class per row.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.predict_proba(x)?.view()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};

    #[test]
    fn every_family_fits_and_round_trips() {
        let d = synth_generate(&SynthConfig {
            n_samples: 120,
            n_classes: 3,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let w = ClassWeights::uniform(3);
        for family in Family::ALL {
            let params = match ModelParams::default_for(family) {
                ModelParams::Rf(p) => ModelParams::Rf(ForestParams {
                    n_estimators: 5,
                    ..p
                }),
                ModelParams::Gbt(p) => ModelParams::Gbt(GbtParams {
                    n_estimators: 5,
                    ..p
                }),
                ModelParams::TabResNet(p) => {
                    ModelParams::TabResNet(TabResNetParams { max_epochs: 3, ..p })
                }
                p => p,
            };
            let m = fit(&params, &d, Some(&d), &w, 7).unwrap();
            assert_eq!(m.family, family);
            assert!(m.training_seconds >= 0.0);
            let p = m.predict_proba(d.features().view()).unwrap();
            for row in p.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict_proba(d.features().view()).unwrap(), p);
            assert!(m
                .predict_proba(ndarray::Array2::zeros((2, 9)).view())
                .is_err());
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("svm".parse::<Family>().is_err());
    }

    #[test]
    fn network_requires_validation() {
        let d = synth_generate(&SynthConfig {
            n_samples: 40,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let p = ModelParams::default_for(Family::TabResNet);
        assert!(fit(&p, &d, None, &ClassWeights::uniform(2), 0).is_err());
    }
}
