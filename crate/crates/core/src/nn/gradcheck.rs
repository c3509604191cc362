use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::TabResNetConfig;
use super::layers::BnMode;
use super::network::TabResNet;
use crate::error::{Error, Result};
use crate::rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for relative errors. Central differences carry about
/// 1e-11 of rounding noise, so gradients that are exactly zero (biases
/// ahead of batch-statistics normalization) need a floor well above that.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub n_parameters: usize,
}

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Compares every analytic parameter gradient of the weighted cross-entropy
/// with a central finite difference. Dropout is not applied.
pub fn check_network(
    net: &TabResNet,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    weights: &[f64],
    bn: BnMode,
) -> Result<GradCheckReport> {
    let (_, grads) = net.loss_and_gradients(x, y, weights, bn, None)?;
    let analytic: Vec<Vec<f64>> = grads.parameters().iter().map(|g| g.to_vec()).collect();
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        n_parameters: 0,
    };
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let original = probe.parameters()[t][i];
            probe.parameters_mut()[t][i] = original + FD_STEP;
            let up = probe.loss(x, y, weights, bn)?;
            probe.parameters_mut()[t][i] = original - FD_STEP;
            let down = probe.loss(x, y, weights, bn)?;
            probe.parameters_mut()[t][i] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            report.max_absolute_error = report.max_absolute_error.max((a - numeric).abs());
            report.max_relative_error = report.max_relative_error.max(relative_error(a, numeric));
            report.n_parameters += 1;
        }
    }
    Ok(report)
}

/// Gradient check on a random network and batch drawn from `cfg.seed`.
///
/// Requires `d <= 6`, `hidden <= 8`, `n <= 8` and zero dropout. In
/// [`BnMode::Running`] the running statistics are randomized first so that
/// the frozen normalization is not the identity.
pub fn gradient_check(cfg: &TabResNetConfig, n: usize, bn: BnMode) -> Result<GradCheckReport> {
    if cfg.input_dim > 6 || cfg.hidden_dim > 8 || !(2..=8).contains(&n) {
        return Err(Error::invalid(
            "gradient check needs d <= 6, hidden <= 8 and 2 <= n <= 8",
        ));
    }
    if cfg.dropout_rate != 0.0 {
        return Err(Error::invalid("gradient check needs dropout_rate = 0"));
    }
    let mut net = TabResNet::build(cfg)?;
    let mut rng = rng::substream(cfg.seed, 99);
    if bn == BnMode::Running {
        let mut norms = vec![&mut net.input_norm];
        for b in &mut net.blocks {
            norms.push(&mut b.norm1);
            norms.push(&mut b.norm2);
        }
        for norm in norms {
            norm.running_mean
                .mapv_inplace(|_| rng.random_range(-0.5..0.5));
            norm.running_var
                .mapv_inplace(|_| rng.random_range(0.5..2.0));
            norm.gamma.mapv_inplace(|_| rng.random_range(0.5..1.5));
            norm.beta.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
    }
    let x = Array2::from_shape_simple_fn((n, cfg.input_dim), || rng.random_range(-2.0..2.0));
    let y: Vec<usize> = (0..n)
        .map(|i| {
            if i < cfg.n_classes {
                i
            } else {
                rng.random_range(0..cfg.n_classes)
            }
        })
        .collect();
    let weights: Vec<f64> = (0..cfg.n_classes)
        .map(|_| rng.random_range(0.5..2.0))
        .collect();
    check_network(&net, x.view(), &y, &weights, bn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::softmax;

    fn small(seed: u64) -> TabResNetConfig {
        TabResNetConfig {
            input_dim: 4,
            n_classes: 3,
            hidden_dim: 8,
            n_blocks: 2,
            use_reduction: seed.is_multiple_of(2),
            dropout_rate: 0.0,
            binary: false,
            seed,
        }
    }

    #[test]
    fn frozen_and_batch_modes_pass() {
        for bn in [BnMode::Running, BnMode::Batch] {
            let r = gradient_check(&small(1), 8, bn).unwrap();
            assert!(r.max_relative_error < 1e-4, "{bn:?}: {r:?}");
        }
    }

    #[test]
    fn zero_output_layer_bias_gradient() {
        let mut net = TabResNet::build(&small(3)).unwrap();
        net.output.weight.fill(0.0);
        net.output.bias.fill(0.0);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i * 4 + j) as f64 / 7.0 - 1.0);
        let y = [0, 2, 1, 2, 2];
        let w = [0.5, 2.0, 1.5];
        let (_, g) = net
            .loss_and_gradients(x.view(), &y, &w, BnMode::Running, None)
            .unwrap();
        let p0 = softmax(Array2::<f64>::zeros((1, 3)).view());
        let mut expected = [0.0; 3];
        for &yi in &y {
            for k in 0..3 {
                let target = if k == yi { 1.0 } else { 0.0 };
                expected[k] += w[yi] * (p0[[0, k]] - target) / y.len() as f64;
            }
        }
        for k in 0..3 {
            assert!((g.output.bias[k] - expected[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_class_weights_give_zero_gradients() {
        let net = TabResNet::build(&small(5)).unwrap();
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i + 2 * j) % 5) as f64 - 2.0);
        let y = [0, 1, 2, 0, 1, 2];
        for bn in [BnMode::Running, BnMode::Batch] {
            let (loss, g) = net
                .loss_and_gradients(x.view(), &y, &[0.0; 3], bn, None)
                .unwrap();
            assert_eq!(loss, 0.0);
            assert!(g.parameters().iter().all(|t| t.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn binary_head_passes() {
        let cfg = TabResNetConfig {
            n_classes: 2,
            binary: true,
            ..small(7)
        };
        let r = gradient_check(&cfg, 6, BnMode::Running).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn rejects_large_configs() {
        let cfg = TabResNetConfig {
            hidden_dim: 16,
            ..small(0)
        };
        assert!(gradient_check(&cfg, 4, BnMode::Running).is_err());
    }
}
