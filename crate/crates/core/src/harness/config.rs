use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv, preprocess, synth_generate, ColumnSchema, Dataset, SplitFractions, SynthConfig,
};
use crate::error::{Error, Result};
use crate::model::{Family, ModelParams};
use crate::nn::TabResNetParams;
use crate::trees::{ForestParams, GbtParams, TreeParams};
use crate::weighting::{WeightingStrategy, DEFAULT_BETA};

use super::hpo::HpoSpec;

/// Where the experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// A CSV file described by a TOML column schema. Relative paths are
    /// resolved against the config file's directory.
    Csv {
        path: PathBuf,
        schema: PathBuf,
    },
    Synth(SynthConfig),
}

impl DataSource {
    /// Loads and preprocesses the dataset.
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, schema } => {
                let schema = ColumnSchema::load(schema)?;
                preprocess(&load_csv(path, &schema)?)
            }
            DataSource::Synth(cfg) => synth_generate(cfg),
        }
    }

    fn rebase(&mut self, dir: &Path) {
        if let DataSource::Csv { path, schema } = self {
            for p in [path, schema] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
    }
}

/// Base hyperparameters per family; missing families use the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyParams {
    pub dt: Option<TreeParams>,
    pub rf: Option<ForestParams>,
    pub gbt: Option<GbtParams>,
    pub tabresnet: Option<TabResNetParams>,
}

impl FamilyParams {
    pub fn for_family(&self, family: Family) -> ModelParams {
        match family {
            Family::Dt => ModelParams::Dt(self.dt.clone().unwrap_or_default()),
            Family::Rf => ModelParams::Rf(self.rf.clone().unwrap_or_default()),
            Family::Gbt => ModelParams::Gbt(self.gbt.clone().unwrap_or_default()),
            Family::TabResNet => ModelParams::TabResNet(self.tabresnet.clone().unwrap_or_default()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoSettings {
    pub enabled: bool,
    /// Tune again at every filter threshold instead of once per target.
    pub retune_per_threshold: bool,
    pub search: HpoSpec,
}

fn default_runs() -> usize {
    10
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_strategies() -> Vec<WeightingStrategy> {
    WeightingStrategy::ALL.to_vec()
}

fn default_families() -> Vec<Family> {
    Family::ALL.to_vec()
}

/// A full sweep: thresholds x classifiers x runs over one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of the prediction target, recorded in every result row.
    pub target: String,
    pub source: DataSource,
    /// Ascending minimum class counts; `None` uses [`default_thresholds`].
    #[serde(default)]
    pub filter_thresholds: Option<Vec<usize>>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<WeightingStrategy>,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub split: SplitFractions,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Worker threads for blocks; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Run blocks one at a time so timings are not contended.
    #[serde(default)]
    pub sequential_timing: bool,
    #[serde(default)]
    pub hpo: HpoSettings,
    #[serde(default)]
    pub params: FamilyParams,
}

impl ExperimentConfig {
    pub fn new(target: impl Into<String>, source: DataSource) -> Self {
        Self {
            target: target.into(),
            source,
            filter_thresholds: None,
            strategies: default_strategies(),
            families: default_families(),
            n_runs: default_runs(),
            base_seed: 0,
            split: SplitFractions::default(),
            beta: DEFAULT_BETA,
            workers: 0,
            sequential_timing: false,
            hpo: HpoSettings::default(),
            params: FamilyParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.families.is_empty() {
            return Err(Error::Config(
                "strategies and families must be non-empty".into(),
            ));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if let Some(t) = &self.filter_thresholds {
            if t.is_empty() || t[0] == 0 || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "filter_thresholds must be a non-empty, strictly ascending list of positive counts".into(),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config("beta must lie in [0, 1)".into()));
        }
        self.split.validate()?;
        self.hpo.search.validate()?;
        for f in &self.families {
            self.params.for_family(*f).validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, resolving relative data paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.source.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The configured thresholds, or the default ladder for `data`.
    pub fn thresholds_for(&self, data: &Dataset) -> Vec<usize> {
        self.filter_thresholds
            .clone()
            .unwrap_or_else(|| default_thresholds(&data.class_counts()))
    }
}

/// Ladder 1, 2, 5, 10, 20, 50, ... kept while at least two classes survive.
pub fn default_thresholds(counts: &[usize]) -> Vec<usize> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let viable = sorted.get(1).copied().unwrap_or(0);
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let t = m * decade;
            if t > viable {
                break 'outer;
            }
            out.push(t);
        }
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    out
}
