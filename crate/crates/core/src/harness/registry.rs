use serde::{Deserialize, Serialize};

use super::config::FamilyParams;
use crate::error::{Error, Result};
use crate::model::{Family, ModelParams};
use crate::weighting::WeightingStrategy;

/// One classifier variant: a model family trained under a weighting scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub id: String,
    pub weighting: WeightingStrategy,
    pub params: ModelParams,
}

impl ClassifierSpec {
    /// Id `"<family>-<weighting>"`, e.g. `gbt-effective`.
    pub fn new(weighting: WeightingStrategy, params: ModelParams) -> Self {
        Self {
            id: format!("{}-{}", params.family(), weighting),
            weighting,
            params,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }
}

/// Ordered set of classifiers with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    specs: Vec<ClassifierSpec>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every family crossed with every strategy.
    pub fn grid(
        families: &[Family],
        strategies: &[WeightingStrategy],
        params: &FamilyParams,
    ) -> Self {
        let specs = families
            .iter()
            .flat_map(|&f| {
                strategies
                    .iter()
                    .map(move |&s| ClassifierSpec::new(s, params.for_family(f)))
            })
            .collect();
        Self { specs }
    }

    pub fn register(&mut self, spec: ClassifierSpec) -> Result<()> {
        if self.get(&spec.id).is_some() {
            return Err(Error::Config(format!(
                "classifier '{}' is already registered",
                spec.id
            )));
        }
        spec.params.validate()?;
        self.specs.push(spec);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ClassifierSpec> {
        self.specs.iter().find(|s| s.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut ClassifierSpec> {
        self.specs.iter_mut().find(|s| s.id == id)
    }

    pub fn specs(&self) -> &[ClassifierSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}
