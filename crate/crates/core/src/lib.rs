//! Benchmarking toolkit for classification under class imbalance.
//!
//! The crate quantifies label skew ([`imbalance`]), derives per-class weights
//! ([`weighting`]), trains four model families that honour those weights
//! ([`trees`], [`nn`]), evaluates them ([`metrics`]) and compares classifiers
//! across experimental blocks with rank statistics ([`stats`]). The
//! [`harness`] module ties these together into reproducible sweeps.

pub mod data;
pub mod error;
pub mod harness;
pub mod imbalance;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod stats;
pub mod trees;
pub mod weighting;

pub(crate) mod rng;

pub use data::{
    ColumnKind, ColumnRole, ColumnSchema, Dataset, RawDataset, SplitIndices, SynthConfig,
};
pub use error::{Error, Result};
pub use imbalance::{ImbalanceReport, LabelDistribution};
pub use metrics::ConfusionMatrix;
pub use model::{Family, ModelParams, TrainedModel};
pub use weighting::{ClassWeights, WeightingStrategy};
