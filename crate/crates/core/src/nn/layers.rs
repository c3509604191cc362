use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Affine map `y = x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    /// Uniform in `±1/sqrt(fan_in)` for both weights and bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight =
            Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
        let bias = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
        Self { weight, bias }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    pub(crate) fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub(crate) fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        dout: &Array2<f64>,
        grad: &mut Linear,
    ) -> Array2<f64> {
        grad.weight += &x.t().dot(dout);
        grad.bias += &dout.sum_axis(Axis(0));
        dout.dot(&self.weight.t())
    }
}

/// Per-feature batch normalization with learned scale and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Which statistics a batch-norm layer normalizes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Statistics of the current batch; gradients flow through them.
    Batch,
    /// Stored running statistics, treated as constants.
    Running,
}

pub(crate) struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    mode: BnMode,
}

/// Batch mean and unbiased variance, used to update running statistics.
pub(crate) struct BnStats {
    mean: Array1<f64>,
    var: Array1<f64>,
}

#[cfg(test)]
impl BnCache {
    pub(crate) fn xhat_for_tests(&self) -> &Array2<f64> {
        &self.xhat
    }

    pub(crate) fn inv_std_for_tests(&self) -> &Array1<f64> {
        &self.inv_std
    }
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            gamma: Array1::zeros(self.gamma.raw_dim()),
            beta: Array1::zeros(self.beta.raw_dim()),
            running_mean: Array1::zeros(self.gamma.raw_dim()),
            running_var: Array1::zeros(self.gamma.raw_dim()),
            momentum: self.momentum,
            eps: self.eps,
        }
    }

    /// Normalizes `z` and returns the output, the backward cache and, in
    /// batch mode, the statistics for the running update.
    pub(crate) fn forward(
        &self,
        z: &Array2<f64>,
        mode: BnMode,
    ) -> (Array2<f64>, BnCache, Option<BnStats>) {
        let (mean, inv_std, stats) = match mode {
            BnMode::Batch => {
                let n = z.nrows() as f64;
                let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                let var = z.var_axis(Axis(0), 0.0);
                let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
                let unbiased = if n > 1.0 { &var * (n / (n - 1.0)) } else { var };
                (
                    mean.clone(),
                    inv_std,
                    Some(BnStats {
                        mean,
                        var: unbiased,
                    }),
                )
            }
            BnMode::Running => (
                self.running_mean.clone(),
                self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt()),
                None,
            ),
        };
        let xhat = (z - &mean) * &inv_std;
        let out = &xhat * &self.gamma + &self.beta;
        (
            out,
            BnCache {
                xhat,
                inv_std,
                mode,
            },
            stats,
        )
    }

    pub(crate) fn update_running(&mut self, stats: &BnStats) {
        let m = self.momentum;
        self.running_mean = &self.running_mean * (1.0 - m) + &stats.mean * m;
        self.running_var = &self.running_var * (1.0 - m) + &stats.var * m;
    }

    pub(crate) fn backward(
        &self,
        cache: &BnCache,
        dout: &Array2<f64>,
        grad: &mut BatchNorm,
    ) -> Array2<f64> {
        grad.gamma += &(dout * &cache.xhat).sum_axis(Axis(0));
        grad.beta += &dout.sum_axis(Axis(0));
        let dxhat = dout * &self.gamma;
        match cache.mode {
            BnMode::Running => dxhat * &cache.inv_std,
            BnMode::Batch => {
                let n = dout.nrows() as f64;
                let sum_d = dxhat.sum_axis(Axis(0));
                let sum_dx = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                ((dxhat * n - &sum_d) - &cache.xhat * &sum_dx) * &(&cache.inv_std / n)
            }
        }
    }
}

pub(crate) fn relu(mut x: Array2<f64>) -> Array2<f64> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

/// Zeroes `dout` wherever the ReLU output was not positive.
pub(crate) fn relu_backward(out: &Array2<f64>, mut dout: Array2<f64>) -> Array2<f64> {
    ndarray::Zip::from(&mut dout).and(out).for_each(|d, &o| {
        if o <= 0.0 {
            *d = 0.0;
        }
    });
    dout
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`. Returns the
/// output and the scaled mask.
pub(crate) fn dropout(x: Array2<f64>, rate: f64, rng: &mut Rng) -> (Array2<f64>, Array2<f64>) {
    let keep = 1.0 - rate;
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    });
    (x * &mask, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn batch_mode_normalizes_each_feature() {
        let mut rng = seeded(4);
        let z = Array2::from_shape_simple_fn((64, 5), || rng.random_range(-3.0..7.0));
        let bn = BatchNorm::new(5);
        let (out, _, _) = bn.forward(&z, BnMode::Batch);
        for col in out.columns() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn running_update_uses_momentum() {
        let z = ndarray::array![[1.0], [3.0]];
        let mut bn = BatchNorm::new(1);
        let (_, _, stats) = bn.forward(&z, BnMode::Batch);
        bn.update_running(&stats.unwrap());
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        // unbiased batch variance is 2
        assert!((bn.running_var[0] - (0.9 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut rng = seeded(11);
        let rate = 0.3;
        let x = Array2::from_elem((1, 8), 2.5);
        let mut acc = Array2::<f64>::zeros((1, 8));
        let trials = 10_000;
        for _ in 0..trials {
            acc += &dropout(x.clone(), rate, &mut rng).0;
        }
        for v in acc.iter() {
            let mean = v / trials as f64;
            assert!(((mean - 2.5) / 2.5).abs() < 0.02);
        }
    }
}
