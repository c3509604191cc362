use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_HIDDEN: usize = 8;
pub const MAX_BLOCKS: usize = 4;
pub const MAX_DROPOUT: f64 = 0.5;

/// Allowed hidden widths for `d` input features:
/// `[max(8, ceil(d/2)), max(lower, 2d)]`.
pub fn hidden_bounds(input_dim: usize) -> (usize, usize) {
    let lo = MIN_HIDDEN.max(input_dim.div_ceil(2));
    (lo, lo.max(2 * input_dim))
}

/// Training hyperparameters. Architecture fields that depend on the data
/// (input width, class count) are filled in by [`TabResNetConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabResNetParams {
    /// Clamped to [`hidden_bounds`]; `None` takes the upper bound.
    pub hidden_dim: Option<usize>,
    pub n_blocks: usize,
    pub use_reduction: bool,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub lr_factor: f64,
    /// Epochs without validation improvement before the learning rate is scaled.
    pub lr_patience: usize,
    /// Single sigmoid output with binary cross-entropy; two-class data only.
    pub binary: bool,
}

impl Default for TabResNetParams {
    fn default() -> Self {
        Self {
            hidden_dim: None,
            n_blocks: 2,
            use_reduction: false,
            dropout_rate: 0.1,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            batch_size: 128,
            max_epochs: 100,
            patience: 15,
            lr_factor: 0.5,
            lr_patience: 3,
            binary: false,
        }
    }
}

impl TabResNetParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BLOCKS).contains(&self.n_blocks) {
            return Err(Error::invalid(format!(
                "n_blocks must be in 1..={MAX_BLOCKS}"
            )));
        }
        if !(0.0..=MAX_DROPOUT).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout_rate must be in [0, {MAX_DROPOUT}]"
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if self.max_epochs == 0 || self.patience == 0 || self.lr_patience == 0 {
            return Err(Error::invalid(
                "max_epochs, patience and lr_patience must be positive",
            ));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::invalid("lr_factor must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Fully resolved network architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabResNetConfig {
    pub input_dim: usize,
    pub n_classes: usize,
    pub hidden_dim: usize,
    pub n_blocks: usize,
    pub use_reduction: bool,
    pub dropout_rate: f64,
    pub binary: bool,
    pub seed: u64,
}

impl TabResNetConfig {
    pub fn resolve(
        input_dim: usize,
        n_classes: usize,
        params: &TabResNetParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let (lo, hi) = hidden_bounds(input_dim);
        let hidden_dim = params.hidden_dim.map_or(hi, |h| h.clamp(lo, hi));
        let cfg = Self {
            input_dim,
            n_classes,
            hidden_dim,
            n_blocks: params.n_blocks,
            use_reduction: params.use_reduction,
            dropout_rate: params.dropout_rate,
            binary: params.binary,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("n_classes must be at least 2"));
        }
        if self.binary && self.n_classes != 2 {
            return Err(Error::invalid("binary mode needs exactly two classes"));
        }
        if self.hidden_dim < MIN_HIDDEN {
            return Err(Error::invalid(format!(
                "hidden_dim must be at least {MIN_HIDDEN}"
            )));
        }
        if !(1..=MAX_BLOCKS).contains(&self.n_blocks) {
            return Err(Error::invalid(format!(
                "n_blocks must be in 1..={MAX_BLOCKS}"
            )));
        }
        if !(0.0..=MAX_DROPOUT).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout_rate must be in [0, {MAX_DROPOUT}]"
            )));
        }
        Ok(())
    }

    /// Width of the layer feeding the output head.
    pub fn head_width(&self) -> usize {
        if self.use_reduction {
            self.hidden_dim / 2
        } else {
            self.hidden_dim
        }
    }

    pub fn n_outputs(&self) -> usize {
        if self.binary {
            1
        } else {
            self.n_classes
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_bounds_examples() {
        assert_eq!(hidden_bounds(1), (8, 8));
        assert_eq!(hidden_bounds(10), (8, 20));
        assert_eq!(hidden_bounds(21), (11, 42));
    }

    #[test]
    fn resolve_clamps_hidden() {
        let p = TabResNetParams {
            hidden_dim: Some(3),
            ..Default::default()
        };
        assert_eq!(
            TabResNetConfig::resolve(10, 3, &p, 0).unwrap().hidden_dim,
            8
        );
        let p = TabResNetParams {
            hidden_dim: Some(500),
            ..Default::default()
        };
        assert_eq!(
            TabResNetConfig::resolve(10, 3, &p, 0).unwrap().hidden_dim,
            20
        );
        assert_eq!(
            TabResNetConfig::resolve(10, 3, &Default::default(), 0)
                .unwrap()
                .hidden_dim,
            20
        );
    }

    #[test]
    fn invalid_ranges_rejected() {
        for p in [
            TabResNetParams {
                n_blocks: 0,
                ..Default::default()
            },
            TabResNetParams {
                n_blocks: 5,
                ..Default::default()
            },
            TabResNetParams {
                dropout_rate: 0.6,
                ..Default::default()
            },
            TabResNetParams {
                batch_size: 1,
                ..Default::default()
            },
            TabResNetParams {
                learning_rate: 0.0,
                ..Default::default()
            },
            TabResNetParams {
                lr_factor: 1.0,
                ..Default::default()
            },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
        let p = TabResNetParams {
            binary: true,
            ..Default::default()
        };
        assert!(TabResNetConfig::resolve(4, 3, &p, 0).is_err());
    }
}
