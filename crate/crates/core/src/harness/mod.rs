//! Experiment orchestration: classifier registry, per-block runs, sweeps,
//! hyperparameter search and result persistence.

mod block;
mod config;
mod hpo;
mod io;
mod pivot;
mod registry;
mod sweep;

pub use block::{block_id, run_block, BlockResult, BlockSettings, BlockStatus, RESULT_COLUMNS};
pub use config::{default_thresholds, DataSource, ExperimentConfig, FamilyParams, HpoSettings};
pub use hpo::{
    hpo_random_search, random_search, DtSpace, FloatRange, GbtSpace, HpoSpec, IntRange, RfSpace,
    SearchOutcome, SearchSpace, TabResNetSpace, Trial, TrialStatus,
};
pub use io::{read_results, write_degradation, write_results, write_summary};
pub use pivot::{pivot_results, Metric};
pub use registry::{ClassifierSpec, Registry};
pub use sweep::{run_sweep, run_sweep_with, summarize, MeanStd, SummaryRow, SweepOutput};
