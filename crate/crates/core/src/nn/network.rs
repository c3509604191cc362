use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::TabResNetConfig;
use super::layers::{dropout, relu, relu_backward, BatchNorm, BnCache, BnMode, BnStats, Linear};
use crate::error::{Error, Result};
use crate::losses::{sigmoid, softmax, weighted_bce, weighted_cce_logits};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlock {
    pub linear1: Linear,
    pub norm1: BatchNorm,
    pub linear2: Linear,
    pub norm2: BatchNorm,
}

/// Residual MLP for tabular inputs.
///
/// ```text
/// x -> Linear -> BN -> ReLU -> Dropout
///   -> n_blocks x [ h + BN(Linear(Dropout(ReLU(BN(Linear(h)))))) -> ReLU ]
///   -> optional Linear(h -> h/2) -> ReLU
///   -> Linear -> logits
/// ```
///
/// In binary mode the output layer has a single logit fed to a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabResNet {
    pub config: TabResNetConfig,
    pub input: Linear,
    pub input_norm: BatchNorm,
    pub blocks: Vec<ResidualBlock>,
    pub reduction: Option<Linear>,
    pub output: Linear,
}

/// How a forward pass treats batch-norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

struct BlockTrace {
    input: Array2<f64>,
    bn1: BnCache,
    act: Array2<f64>,
    mask: Option<Array2<f64>>,
    dropped: Array2<f64>,
    bn2: BnCache,
    out: Array2<f64>,
}

struct Trace {
    x: Array2<f64>,
    bn0: BnCache,
    act0: Array2<f64>,
    mask0: Option<Array2<f64>>,
    blocks: Vec<BlockTrace>,
    /// Input and output of the reduction layer.
    reduction: Option<(Array2<f64>, Array2<f64>)>,
    head_input: Array2<f64>,
}

impl TabResNet {
    /// Initializes every layer from `config.seed`.
    pub fn build(config: &TabResNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(config.seed);
        let h = config.hidden_dim;
        let input = Linear::init(config.input_dim, h, &mut rng);
        let blocks = (0..config.n_blocks)
            .map(|_| ResidualBlock {
                linear1: Linear::init(h, h, &mut rng),
                norm1: BatchNorm::new(h),
                linear2: Linear::init(h, h, &mut rng),
                norm2: BatchNorm::new(h),
            })
            .collect();
        let reduction = config
            .use_reduction
            .then(|| Linear::init(h, h / 2, &mut rng));
        let output = Linear::init(config.head_width(), config.n_outputs(), &mut rng);
        Ok(Self {
            config: config.clone(),
            input,
            input_norm: BatchNorm::new(h),
            blocks,
            reduction,
            output,
        })
    }

    /// Copy of the network with every parameter set to zero; used as a
    /// gradient accumulator with the same layout.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            input: self.input.zeros_like(),
            input_norm: self.input_norm.zeros_like(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ResidualBlock {
                    linear1: b.linear1.zeros_like(),
                    norm1: b.norm1.zeros_like(),
                    linear2: b.linear2.zeros_like(),
                    norm2: b.norm2.zeros_like(),
                })
                .collect(),
            reduction: self.reduction.as_ref().map(Linear::zeros_like),
            output: self.output.zeros_like(),
        }
    }

    /// Trainable tensors in a fixed order: each linear layer's weight then
    /// bias, each batch-norm's scale then shift, from input to output.
    pub fn parameters(&self) -> Vec<&[f64]> {
        fn lin(l: &Linear) -> [&[f64]; 2] {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        }
        fn bn(b: &BatchNorm) -> [&[f64]; 2] {
            [
                b.gamma.as_slice().expect("standard layout"),
                b.beta.as_slice().expect("standard layout"),
            ]
        }
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(lin(&self.input));
        out.extend(bn(&self.input_norm));
        for b in &self.blocks {
            out.extend(lin(&b.linear1));
            out.extend(bn(&b.norm1));
            out.extend(lin(&b.linear2));
            out.extend(bn(&b.norm2));
        }
        if let Some(r) = &self.reduction {
            out.extend(lin(r));
        }
        out.extend(lin(&self.output));
        out
    }

    /// Mutable view of [`Self::parameters`], same order.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        fn lin(l: &mut Linear) -> [&mut [f64]; 2] {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        }
        fn bn(b: &mut BatchNorm) -> [&mut [f64]; 2] {
            [
                b.gamma.as_slice_mut().expect("standard layout"),
                b.beta.as_slice_mut().expect("standard layout"),
            ]
        }
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(lin(&mut self.input));
        out.extend(bn(&mut self.input_norm));
        for b in &mut self.blocks {
            out.extend(lin(&mut b.linear1));
            out.extend(bn(&mut b.norm1));
            out.extend(lin(&mut b.linear2));
            out.extend(bn(&mut b.norm2));
        }
        if let Some(r) = &mut self.reduction {
            out.extend(lin(r));
        }
        out.extend(lin(&mut self.output));
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    fn check_width(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} features, got {}",
                self.config.input_dim,
                x.ncols()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    fn run(
        &self,
        x: ArrayView2<'_, f64>,
        bn: BnMode,
        mut drop: Option<&mut Rng>,
    ) -> (Array2<f64>, Trace, Vec<BnStats>) {
        let rate = self.config.dropout_rate;
        let mut stats = Vec::new();
        let mut keep = |s: Option<BnStats>| stats.extend(s);
        let mut apply_dropout = |a: Array2<f64>| match drop.as_deref_mut() {
            Some(rng) if rate > 0.0 => {
                let (o, m) = dropout(a, rate, rng);
                (o, Some(m))
            }
            _ => (a, None),
        };

        let z0 = self.input.forward(x);
        let (n0, bn0, s) = self.input_norm.forward(&z0, bn);
        keep(s);
        let act0 = relu(n0);
        let (mut h, mask0) = apply_dropout(act0.clone());

        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let a = block.linear1.forward(h.view());
            let (b, bn1, s) = block.norm1.forward(&a, bn);
            keep(s);
            let act = relu(b);
            let (dropped, mask) = apply_dropout(act.clone());
            let e = block.linear2.forward(dropped.view());
            let (f, bn2, s) = block.norm2.forward(&e, bn);
            keep(s);
            let out = relu(f + &h);
            blocks.push(BlockTrace {
                input: std::mem::replace(&mut h, out.clone()),
                bn1,
                act,
                mask,
                dropped,
                bn2,
                out,
            });
        }

        let reduction = self.reduction.as_ref().map(|r| {
            let out = relu(r.forward(h.view()));
            (std::mem::replace(&mut h, out.clone()), out)
        });
        let logits = self.output.forward(h.view());
        let trace = Trace {
            x: x.to_owned(),
            bn0,
            act0,
            mask0,
            blocks,
            reduction,
            head_input: h,
        };
        (logits, trace, stats)
    }

    fn apply_running_updates(&mut self, stats: &[BnStats]) {
        let mut norms: Vec<&mut BatchNorm> = vec![&mut self.input_norm];
        for b in &mut self.blocks {
            norms.push(&mut b.norm1);
            norms.push(&mut b.norm2);
        }
        for (norm, s) in norms.into_iter().zip(stats) {
            norm.update_running(s);
        }
    }

    /// Inference logits: running statistics, no dropout.
    pub fn forward_eval(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(x)?;
        Ok(self.run(x, BnMode::Running, None).0)
    }

    /// Training-mode logits: batch statistics, dropout, and a running
    /// statistics update.
    pub fn forward_train(&mut self, x: ArrayView2<'_, f64>, rng: &mut Rng) -> Result<Array2<f64>> {
        self.check_width(x)?;
        let (logits, _, stats) = self.run(x, BnMode::Batch, Some(rng));
        self.apply_running_updates(&stats);
        Ok(logits)
    }

    pub fn forward(
        &mut self,
        x: ArrayView2<'_, f64>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Array2<f64>> {
        match mode {
            Mode::Train => self.forward_train(x, rng),
            Mode::Eval => self.forward_eval(x),
        }
    }

    /// Class probabilities from an eval-mode pass.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let logits = self.forward_eval(x)?;
        Ok(self.probabilities(&logits))
    }

    pub(crate) fn probabilities(&self, logits: &Array2<f64>) -> Array2<f64> {
        if self.config.binary {
            let mut p = Array2::zeros((logits.nrows(), 2));
            for (i, &z) in logits.column(0).iter().enumerate() {
                let s = sigmoid(z);
                p[[i, 0]] = 1.0 - s;
                p[[i, 1]] = s;
            }
            p
        } else {
            softmax(logits.view())
        }
    }

    /// Weighted cross-entropy of `logits` and its gradient.
    pub(crate) fn objective(
        &self,
        logits: &Array2<f64>,
        y: &[usize],
        weights: &[f64],
    ) -> Result<(f64, Array2<f64>)> {
        if self.config.binary {
            let p: Vec<f64> = logits.column(0).iter().map(|&z| sigmoid(z)).collect();
            let (loss, g) = weighted_bce(y, &p, weights)?;
            Ok((
                loss,
                Array2::from_shape_vec((g.len(), 1), g).expect("one logit per row"),
            ))
        } else {
            weighted_cce_logits(y, logits.view(), weights)
        }
    }

    fn backward(&self, trace: &Trace, dlogits: &Array2<f64>) -> TabResNet {
        let mut g = self.zeros_like();
        let mut dh = self
            .output
            .backward(trace.head_input.view(), dlogits, &mut g.output);
        if let (Some(r), Some((input, out))) = (&self.reduction, &trace.reduction) {
            let dz = relu_backward(out, dh);
            dh = r.backward(
                input.view(),
                &dz,
                g.reduction.as_mut().expect("same layout"),
            );
        }
        for ((block, t), gb) in self
            .blocks
            .iter()
            .zip(&trace.blocks)
            .zip(g.blocks.iter_mut())
            .rev()
        {
            let dsum = relu_backward(&t.out, dh);
            let de = block.norm2.backward(&t.bn2, &dsum, &mut gb.norm2);
            let mut dact = block
                .linear2
                .backward(t.dropped.view(), &de, &mut gb.linear2);
            if let Some(m) = &t.mask {
                dact *= m;
            }
            let db = relu_backward(&t.act, dact);
            let da = block.norm1.backward(&t.bn1, &db, &mut gb.norm1);
            dh = block.linear1.backward(t.input.view(), &da, &mut gb.linear1) + dsum;
        }
        if let Some(m) = &trace.mask0 {
            dh *= m;
        }
        let dn0 = relu_backward(&trace.act0, dh);
        let dz0 = self
            .input_norm
            .backward(&trace.bn0, &dn0, &mut g.input_norm);
        self.input.backward(trace.x.view(), &dz0, &mut g.input);
        g
    }

    /// Loss and parameter gradients for one batch. The gradient is returned
    /// as a network of the same shape; read it through [`Self::parameters`].
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        weights: &[f64],
        bn: BnMode,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<(f64, TabResNet)> {
        self.check_width(x)?;
        let (logits, trace, _) = self.run(x, bn, dropout_rng);
        let (loss, dlogits) = self.objective(&logits, y, weights)?;
        Ok((loss, self.backward(&trace, &dlogits)))
    }

    /// Loss without gradients, for finite differences.
    pub fn loss(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        weights: &[f64],
        bn: BnMode,
    ) -> Result<f64> {
        self.check_width(x)?;
        let (logits, _, _) = self.run(x, bn, None);
        Ok(self.objective(&logits, y, weights)?.0)
    }

    /// One training step's forward and backward pass; running statistics are
    /// updated as in [`Self::forward_train`].
    pub(crate) fn train_step_gradients(
        &mut self,
        x: ArrayView2<'_, f64>,
        y: &[usize],
        weights: &[f64],
        rng: &mut Rng,
    ) -> Result<(f64, TabResNet)> {
        let (logits, trace, stats) = self.run(x, BnMode::Batch, Some(rng));
        let (loss, dlogits) = self.objective(&logits, y, weights)?;
        let grads = self.backward(&trace, &dlogits);
        self.apply_running_updates(&stats);
        Ok((loss, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::config::TabResNetConfig;
    use crate::nn::layers::BN_EPS;
    use rand::Rng as _;

    fn cfg(d: usize, h: usize, blocks: usize, reduction: bool, k: usize) -> TabResNetConfig {
        TabResNetConfig {
            input_dim: d,
            n_classes: k,
            hidden_dim: h,
            n_blocks: blocks,
            use_reduction: reduction,
            dropout_rate: 0.0,
            binary: false,
            seed: 3,
        }
    }

    fn random_x(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng::seeded(seed);
        Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0))
    }

    #[test]
    fn parameter_count_matches_layer_shapes() {
        let (d, h, k) = (10, 16, 3);
        let net = TabResNet::build(&cfg(d, h, 2, false, k)).unwrap();
        let expected = (d * h + h) + 2 * h + 2 * (2 * (h * h + h) + 4 * h) + (h * k + k);
        assert_eq!(net.n_parameters(), expected);
    }

    #[test]
    fn reduction_halves_head_width() {
        let net = TabResNet::build(&cfg(10, 16, 1, true, 3)).unwrap();
        assert_eq!(net.output.fan_in(), 8);
        assert_eq!(net.reduction.as_ref().unwrap().fan_out(), 8);
    }

    #[test]
    fn same_seed_same_initialization() {
        let a = TabResNet::build(&cfg(5, 9, 3, true, 4)).unwrap();
        let b = TabResNet::build(&cfg(5, 9, 3, true, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn output_shape_and_width_check() {
        let mut net = TabResNet::build(&cfg(4, 8, 1, false, 5)).unwrap();
        let mut rng = rng::seeded(0);
        let x = random_x(7, 4, 1);
        assert_eq!(
            net.forward(x.view(), Mode::Train, &mut rng).unwrap().dim(),
            (7, 5)
        );
        assert_eq!(
            net.forward(x.view(), Mode::Eval, &mut rng).unwrap().dim(),
            (7, 5)
        );
        assert!(net.forward_eval(random_x(3, 5, 1).view()).is_err());
    }

    #[test]
    fn zeroed_branch_leaves_skip_path() {
        let mut net = TabResNet::build(&cfg(3, 8, 1, false, 2)).unwrap();
        net.blocks[0].linear2.weight.fill(0.0);
        net.blocks[0].linear2.bias.fill(0.0);
        let x = random_x(40, 3, 2);
        for bn in [BnMode::Batch, BnMode::Running] {
            let (_, trace, _) = net.run(x.view(), bn, None);
            let block = &trace.blocks[0];
            assert_eq!(block.out, relu(block.input.clone()));
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let net = TabResNet::build(&TabResNetConfig {
            dropout_rate: 0.4,
            ..cfg(4, 8, 2, false, 3)
        })
        .unwrap();
        let x = random_x(10, 4, 5);
        assert_eq!(
            net.forward_eval(x.view()).unwrap(),
            net.forward_eval(x.view()).unwrap()
        );
    }

    #[test]
    fn batch_statistics_are_standardized_before_affine() {
        let net = TabResNet::build(&cfg(6, 12, 2, false, 3)).unwrap();
        let x = random_x(64, 6, 9);
        let (_, trace, _) = net.run(x.view(), BnMode::Batch, None);
        let caches =
            std::iter::once(&trace.bn0).chain(trace.blocks.iter().flat_map(|b| [&b.bn1, &b.bn2]));
        for c in caches {
            for (col, &inv_std) in c
                .xhat_for_tests()
                .columns()
                .into_iter()
                .zip(c.inv_std_for_tests())
            {
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let raw_var = 1.0 / (inv_std * inv_std) - BN_EPS;
                assert!(mean.abs() < 1e-6);
                // var(xhat) = raw / (raw + eps) exactly
                assert!((var - raw_var * inv_std * inv_std).abs() < 1e-10);
                if raw_var >= 0.1 {
                    assert!((var - 1.0).abs() < 1e-4, "var {var}");
                }
            }
        }
    }

    #[test]
    fn binary_mode_has_one_logit() {
        let net = TabResNet::build(&TabResNetConfig {
            binary: true,
            ..cfg(3, 8, 1, false, 2)
        })
        .unwrap();
        let p = net.predict_proba(random_x(5, 3, 0).view()).unwrap();
        assert_eq!(p.dim(), (5, 2));
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let net = TabResNet::build(&cfg(3, 8, 1, true, 2)).unwrap();
        let s = serde_json::to_string(&net).unwrap();
        let back: TabResNet = serde_json::from_str(&s).unwrap();
        assert_eq!(net, back);
    }
}
