//! Residual MLP for tabular data with hand-written forward and backward
//! passes, trained by AdamW on the class-weighted cross-entropy.
//!
//! Parameters serialize to JSON with every tensor stored as
//! `{"v": 1, "dim": [...], "data": [...]}`, data in row-major order. Linear
//! weights have shape `[in, out]`.

mod config;
mod gradcheck;
mod layers;
mod network;
mod optim;
mod train;

pub use config::{
    hidden_bounds, TabResNetConfig, TabResNetParams, MAX_BLOCKS, MAX_DROPOUT, MIN_HIDDEN,
};
pub use gradcheck::{
    check_network, gradient_check, relative_error, GradCheckReport, FD_STEP, RELATIVE_FLOOR,
};
pub use layers::{BatchNorm, BnMode, Linear, BN_EPS, BN_MOMENTUM};
pub use network::{Mode, ResidualBlock, TabResNet};
pub use optim::AdamW;
pub use train::{
    train, train_network, EpochOutcome, EpochRecord, FittedTabResNet, PlateauTracker,
    TrainingHistory, MIN_IMPROVEMENT,
};
