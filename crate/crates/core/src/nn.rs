//! The 1D CNN backbone shared by the teacher and the students.
//!
//! A network is `depth` blocks of conv → norm → activation → pool, a global
//! max over time, and a linear head. A teacher additionally concatenates the
//! shapelet-transform features of its raw input before the head.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::shapelet::ShapeletPool;
use crate::tensor::{
    avgpool1d_backward, avgpool1d_forward, batchnorm_backward, concat_features, global_max_backward,
    global_max_forward, groupnorm_backward, groupnorm_forward, maxpool1d_backward, maxpool1d_forward,
    split_features, strans_backward, strans_forward, Activation, BatchNorm1d, BnCache, BnMode, Conv1d,
    GroupNorm, GroupNormCache, Linear, StransCache, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    None,
    Batch,
    Instance,
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pooling {
    None,
    Max,
    Mean,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::None => "none",
            Norm::Batch => "batch",
            Norm::Instance => "instance",
            Norm::Layer => "layer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Norm::None, Norm::Batch, Norm::Instance, Norm::Layer]
            .into_iter()
            .find(|n| n.name() == s)
    }
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::None => "none",
            Pooling::Max => "max",
            Pooling::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Pooling::None, Pooling::Max, Pooling::Mean]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

/// Architecture of a backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arch {
    pub depth: usize,
    pub width: usize,
    pub kernel: usize,
    pub norm: Norm,
    pub activation: Activation,
    pub pooling: Pooling,
}

impl Default for Arch {
    /// Three blocks of width 32 with batch norm, ReLU and max pooling.
    fn default() -> Self {
        Self {
            depth: 3,
            width: 32,
            kernel: 5,
            norm: Norm::Batch,
            activation: Activation::Relu,
            pooling: Pooling::Max,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth={} width={} norm={} act={} pool={}",
            self.depth,
            self.width,
            self.norm.name(),
            self.activation.name(),
            self.pooling.name()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum NormLayer {
    None,
    Batch(BatchNorm1d),
    Group(GroupNorm),
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    conv: Conv1d,
    norm: NormLayer,
}

#[derive(Debug, Clone)]
enum NormTrace {
    None,
    Batch(BnCache),
    Group(GroupNormCache),
}

#[derive(Debug, Clone)]
enum PoolTrace {
    None,
    Max(Vec<usize>),
    Mean,
}

#[derive(Debug, Clone)]
struct BlockTrace {
    input: Tensor,
    conv_out: Tensor,
    norm: NormTrace,
    normed: Tensor,
    activated: Tensor,
    pool: PoolTrace,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Tensor,
    blocks: Vec<BlockTrace>,
    reduce_shape: Vec<usize>,
    reduce_arg: Vec<usize>,
    head_input: Tensor,
    strans: Option<StransCache>,
    pub logits: Tensor,
}

impl Trace {
    /// Per-channel batch mean and biased variance of every batch-norm layer,
    /// in depth order.
    pub fn bn_batch_stats(&self) -> Vec<(&[f64], &[f64])> {
        self.blocks
            .iter()
            .filter_map(|b| match &b.norm {
                NormTrace::Batch(c) => Some((c.batch_mean.as_slice(), c.batch_var.as_slice())),
                _ => None,
            })
            .collect()
    }
}

/// What a backward pass should produce.
#[derive(Debug, Clone, Copy, Default)]
pub struct BackwardOptions<'a> {
    pub input_grad: bool,
    pub param_grads: bool,
    /// Extra upstream gradients on each batch-norm layer's batch mean and
    /// variance, in depth order.
    pub stat_grads: Option<&'a [(Vec<f64>, Vec<f64>)]>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub input: Option<Tensor>,
    /// Parameter gradients in [`Network::parameters`] order; empty unless
    /// requested.
    pub params: Vec<Tensor>,
}

/// A backbone with an optional shapelet branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Arch,
    in_channels: usize,
    num_classes: usize,
    blocks: Vec<Block>,
    head: Linear,
    pool: Option<ShapeletPool>,
}

impl Network {
    pub fn new(
        arch: Arch,
        in_channels: usize,
        num_classes: usize,
        pool: Option<ShapeletPool>,
        seed: u64,
    ) -> Result<Self> {
        if arch.depth == 0 || arch.width == 0 || arch.kernel == 0 || arch.kernel % 2 == 0 {
            return Err(Error::Config(format!("unsupported architecture {arch}")));
        }
        if in_channels == 0 || num_classes == 0 {
            return Err(Error::Config("network needs at least one channel and one class".into()));
        }
        if let Some(p) = &pool {
            if p.is_empty() {
                return Err(Error::Shape("shapelet branch needs a non-empty pool".into()));
            }
            if p.required_channels() > in_channels {
                return Err(Error::Shape(format!(
                    "pool needs {} channels, network takes {in_channels}",
                    p.required_channels()
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(arch.depth);
        for i in 0..arch.depth {
            let c_in = if i == 0 { in_channels } else { arch.width };
            let conv = Conv1d::new(c_in, arch.width, arch.kernel, 1, arch.kernel / 2, &mut rng);
            let norm = match arch.norm {
                Norm::None => NormLayer::None,
                Norm::Batch => NormLayer::Batch(BatchNorm1d::new(arch.width)),
                Norm::Instance => NormLayer::Group(GroupNorm::new(arch.width, arch.width)),
                Norm::Layer => NormLayer::Group(GroupNorm::new(arch.width, 1)),
            };
            blocks.push(Block { conv, norm });
        }
        let k = pool.as_ref().map_or(0, ShapeletPool::len);
        let head = Linear::new(arch.width + k, num_classes, &mut rng);
        Ok(Self {
            arch,
            in_channels,
            num_classes,
            blocks,
            head,
            pool,
        })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn pool(&self) -> Option<&ShapeletPool> {
        self.pool.as_ref()
    }

    #[cfg(test)]
    fn set_pool(&mut self, pool: ShapeletPool) -> Result<()> {
        let k = self.pool.as_ref().map_or(0, ShapeletPool::len);
        if pool.len() != k {
            return Err(Error::Shape(format!("pool of {} shapelets replaces one of {k}", pool.len())));
        }
        self.pool = Some(pool);
        Ok(())
    }

    pub fn bn_layers(&self) -> Vec<&BatchNorm1d> {
        self.blocks
            .iter()
            .filter_map(|b| match &b.norm {
                NormLayer::Batch(bn) => Some(bn),
                _ => None,
            })
            .collect()
    }

    /// Learnable tensors with stable names, in optimizer order.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.conv.weight"), &b.conv.weight));
            out.push((format!("block{i}.conv.bias"), &b.conv.bias));
            match &b.norm {
                NormLayer::None => {}
                NormLayer::Batch(bn) => {
                    out.push((format!("block{i}.norm.gamma"), &bn.state.gamma));
                    out.push((format!("block{i}.norm.beta"), &bn.state.beta));
                }
                NormLayer::Group(g) => {
                    out.push((format!("block{i}.norm.gamma"), &g.gamma));
                    out.push((format!("block{i}.norm.beta"), &g.beta));
                }
            }
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight);
            out.push(&mut b.conv.bias);
            match &mut b.norm {
                NormLayer::None => {}
                NormLayer::Batch(bn) => {
                    out.push(&mut bn.state.gamma);
                    out.push(&mut bn.state.beta);
                }
                NormLayer::Group(g) => {
                    out.push(&mut g.gamma);
                    out.push(&mut g.beta);
                }
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    /// Running statistics of each batch-norm layer as `(name, values)`.
    pub fn buffers(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if let NormLayer::Batch(bn) = &b.norm {
                out.push((format!("block{i}.norm.running_mean"), bn.state.running_mean.as_slice()));
                out.push((format!("block{i}.norm.running_var"), bn.state.running_var.as_slice()));
            }
        }
        out
    }

    pub(crate) fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            if let NormLayer::Batch(bn) = &mut b.norm {
                out.push(&mut bn.state.running_mean);
                out.push(&mut bn.state.running_var);
            }
        }
        out
    }

    /// Overwrites the running (mean, variance) of each batch-norm layer, in
    /// layer order.
    pub fn set_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        let mut buffers = self.buffers_mut();
        if buffers.len() != 2 * stats.len() {
            return Err(Error::Shape(format!(
                "{} statistic pairs for {} batch-norm layers",
                stats.len(),
                buffers.len() / 2
            )));
        }
        for (pair, (mean, var)) in buffers.chunks_mut(2).zip(stats) {
            if pair[0].len() != mean.len() || pair[1].len() != var.len() {
                return Err(Error::Shape("statistic width differs from the layer width".into()));
            }
            pair[0].clone_from(mean);
            pair[1].clone_from(var);
        }
        Ok(())
    }

    /// Zeroes the head columns that read shapelet features, so the logits no
    /// longer depend on the pool.
    pub fn zero_shapelet_head(&mut self) {
        let k = self.pool.as_ref().map_or(0, ShapeletPool::len);
        if k == 0 {
            return;
        }
        let n_in = self.arch.width + k;
        let w = self.head.weight.data_mut();
        for row in w.chunks_mut(n_in) {
            row[self.arch.width..].fill(0.0);
        }
    }

    pub fn forward(&self, input: &Tensor, mode: BnMode) -> Result<Trace> {
        let (_, c, _) = input.dims3()?;
        if c != self.in_channels {
            return Err(Error::Shape(format!("network takes {} channels, got {c}", self.in_channels)));
        }
        let mut x = input.clone();
        let mut traces = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let conv_out = b.conv.forward(&x)?;
            let (normed, norm) = match &b.norm {
                NormLayer::None => (conv_out.clone(), NormTrace::None),
                NormLayer::Batch(bn) => {
                    let (y, cache) = bn.forward(&conv_out, mode)?;
                    (y, NormTrace::Batch(cache))
                }
                NormLayer::Group(g) => {
                    let (y, cache) = groupnorm_forward(&conv_out, g)?;
                    (y, NormTrace::Group(cache))
                }
            };
            let activated = self.arch.activation.forward(&normed);
            let (out, pool) = match self.arch.pooling {
                Pooling::None => (activated.clone(), PoolTrace::None),
                Pooling::Max => {
                    let (y, arg) = maxpool1d_forward(&activated, 2, 2)?;
                    (y, PoolTrace::Max(arg))
                }
                Pooling::Mean => (avgpool1d_forward(&activated, 2, 2)?, PoolTrace::Mean),
            };
            traces.push(BlockTrace {
                input: std::mem::replace(&mut x, out),
                conv_out,
                norm,
                normed,
                activated,
                pool,
            });
        }
        let reduce_shape = x.shape().to_vec();
        let (reduced, reduce_arg) = global_max_forward(&x)?;
        let (head_input, strans) = match &self.pool {
            Some(pool) => {
                let (feat, cache) = strans_forward(input, pool)?;
                (concat_features(&reduced, &feat)?, Some(cache))
            }
            None => (reduced, None),
        };
        let logits = self.head.forward(&head_input)?;
        Ok(Trace {
            input: input.clone(),
            blocks: traces,
            reduce_shape,
            reduce_arg,
            head_input,
            strans,
            logits,
        })
    }

    /// Logits in eval mode.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward(input, BnMode::Eval)?.logits)
    }

    /// Folds the batch statistics of a training-mode trace into the running
    /// estimates.
    pub fn update_running(&mut self, trace: &Trace) {
        for (b, t) in self.blocks.iter_mut().zip(&trace.blocks) {
            if let (NormLayer::Batch(bn), NormTrace::Batch(cache)) = (&mut b.norm, &t.norm) {
                if cache.mode == BnMode::Train {
                    bn.update_running(cache);
                }
            }
        }
    }

    pub fn backward(&self, trace: &Trace, grad_logits: &Tensor, opts: BackwardOptions<'_>) -> Result<Gradients> {
        let n_bn = self.bn_layers().len();
        if let Some(sg) = opts.stat_grads {
            if sg.len() != n_bn {
                return Err(Error::Shape(format!(
                    "{} statistic gradients for {n_bn} batch-norm layers",
                    sg.len()
                )));
            }
        }
        let head = self.head.backward(&trace.head_input, grad_logits)?;
        let (g_reduced, g_strans) = match &self.pool {
            Some(_) => {
                let (a, b) = split_features(&head.input, self.arch.width)?;
                (a, Some(b))
            }
            None => (head.input, None),
        };
        let mut g = global_max_backward(&trace.reduce_shape, &trace.reduce_arg, &g_reduced)?;

        // Per-block parameter grads, collected back to front.
        let mut block_grads: Vec<Vec<Tensor>> = Vec::with_capacity(self.blocks.len());
        let mut bn_index = n_bn;
        for (i, (b, t)) in self.blocks.iter().zip(&trace.blocks).enumerate().rev() {
            g = match &t.pool {
                PoolTrace::None => g,
                PoolTrace::Max(arg) => maxpool1d_backward(t.activated.shape(), arg, &g)?,
                PoolTrace::Mean => avgpool1d_backward(t.activated.shape(), 2, 2, &g)?,
            };
            g = self.arch.activation.backward(&t.normed, &t.activated, &g)?;
            let mut grads = Vec::new();
            g = match (&b.norm, &t.norm) {
                (NormLayer::None, NormTrace::None) => g,
                (NormLayer::Batch(bn), NormTrace::Batch(cache)) => {
                    bn_index -= 1;
                    let sg = opts
                        .stat_grads
                        .map(|s| (s[bn_index].0.as_slice(), s[bn_index].1.as_slice()));
                    let r = batchnorm_backward(cache, &bn.state, &t.conv_out, &g, sg)?;
                    grads.push(Tensor::new(&[r.gamma.len()], r.gamma)?);
                    grads.push(Tensor::new(&[r.beta.len()], r.beta)?);
                    r.input
                }
                (NormLayer::Group(gn), NormTrace::Group(cache)) => {
                    let (gx, gg, gb) = groupnorm_backward(cache, gn, &g)?;
                    grads.push(Tensor::new(&[gg.len()], gg)?);
                    grads.push(Tensor::new(&[gb.len()], gb)?);
                    gx
                }
                _ => return Err(Error::Shape("trace does not belong to this network".into())),
            };
            let need_input = i > 0 || opts.input_grad;
            let conv = b.conv.backward(&t.input, &g, need_input)?;
            let mut all = vec![conv.weight, conv.bias];
            all.extend(grads);
            block_grads.push(all);
            if let Some(gi) = conv.input {
                g = gi;
            }
        }

        let input = if opts.input_grad {
            let mut gx = g;
            if let (Some(pool), Some(cache), Some(gs)) = (&self.pool, &trace.strans, &g_strans) {
                let extra = strans_backward(&trace.input, pool, cache, gs)?;
                gx.data_mut().iter_mut().zip(extra.data()).for_each(|(a, b)| *a += b);
            }
            Some(gx)
        } else {
            None
        };

        let params = if opts.param_grads {
            let mut p: Vec<Tensor> = block_grads.into_iter().rev().flatten().collect();
            p.push(head.weight);
            p.push(head.bias);
            p
        } else {
            Vec::new()
        };
        Ok(Gradients { input, params })
    }

    /// Adds parameter gradients into the parameters' gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<()> {
        let params = self.parameters_mut();
        if grads.params.len() != params.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} parameters",
                grads.params.len(),
                params.len()
            )));
        }
        for (p, g) in params.into_iter().zip(&grads.params) {
            p.accumulate_grad(g.data())?;
        }
        Ok(())
    }
}

/// Packs a batch of equal-shape series into `[B, C, L]`.
pub fn batch_tensor<'a>(series: impl IntoIterator<Item = &'a crate::data::TimeSeries>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut shape: Option<(usize, usize)> = None;
    let mut b = 0;
    for s in series {
        let dims = (s.channels(), s.len());
        match shape {
            None => shape = Some(dims),
            Some(d) if d != dims => {
                return Err(Error::Shape(format!("batch mixes shapes {d:?} and {dims:?}")));
            }
            _ => {}
        }
        data.extend_from_slice(s.values());
        b += 1;
    }
    let (c, l) = shape.ok_or_else(|| Error::Empty("cannot batch zero series".into()))?;
    Tensor::new(&[b, c, l], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapelet::{Candidate, Shapelet};
    use rand::Rng;

    fn pool() -> ShapeletPool {
        let s = |position, values: Vec<f64>| Shapelet {
            candidate: Candidate {
                series_index: None,
                channel: 0,
                position,
                values,
            },
            score: 1.0,
            threshold: 0.0,
        };
        ShapeletPool::new(vec![s(2, vec![1.0, 0.0, -1.0]), s(6, vec![0.5, 0.5])], 1)
    }

    fn random_input(b: usize, c: usize, l: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(&[b, c, l], (0..b * c * l).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn output_shape_and_eval_determinism() {
        let net = Network::new(Arch::default(), 1, 3, Some(pool()), 1).unwrap();
        let x = random_input(4, 1, 16, 2);
        let a = net.predict(&x).unwrap();
        assert_eq!(a.shape(), &[4, 3]);
        assert_eq!(a, net.predict(&x).unwrap());
    }

    #[test]
    fn zeroed_shapelet_head_ignores_pool_contents() {
        let mut net = Network::new(Arch::default(), 1, 2, Some(pool()), 3).unwrap();
        net.zero_shapelet_head();
        let x = random_input(3, 1, 12, 4);
        let before = net.predict(&x).unwrap();
        let shifted = pool()
            .shapelets()
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.candidate.values.iter_mut().for_each(|v| *v += 3.0);
                s
            })
            .collect();
        net.set_pool(ShapeletPool::new(shifted, 1)).unwrap();
        assert_eq!(before, net.predict(&x).unwrap());
    }

    #[test]
    fn parameter_lists_line_up() {
        for norm in [Norm::None, Norm::Batch, Norm::Instance, Norm::Layer] {
            let arch = Arch { norm, ..Arch::default() };
            let mut net = Network::new(arch, 2, 3, None, 0).unwrap();
            let shapes: Vec<Vec<usize>> = net.parameters().iter().map(|(_, t)| t.shape().to_vec()).collect();
            let x = random_input(2, 2, 16, 5);
            let trace = net.forward(&x, BnMode::Train).unwrap();
            let grads = net
                .backward(&trace, &Tensor::filled(&[2, 3], 0.1), BackwardOptions { param_grads: true, ..Default::default() })
                .unwrap();
            let gshapes: Vec<Vec<usize>> = grads.params.iter().map(|t| t.shape().to_vec()).collect();
            assert_eq!(shapes, gshapes);
            net.accumulate(&grads).unwrap();
        }
    }

    #[test]
    fn train_mode_moves_running_stats_eval_does_not() {
        let mut net = Network::new(Arch::default(), 1, 2, None, 0).unwrap();
        let x = random_input(4, 1, 16, 6);
        let t = net.forward(&x, BnMode::Eval).unwrap();
        net.update_running(&t);
        assert!(net.bn_layers()[0].state.running_mean.iter().all(|&m| m == 0.0));
        let t = net.forward(&x, BnMode::Train).unwrap();
        net.update_running(&t);
        assert!(net.bn_layers()[0].state.running_mean.iter().any(|&m| m != 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = Network::new(Arch::default(), 2, 2, None, 0).unwrap();
        assert!(matches!(net.predict(&Tensor::zeros(&[1, 1, 8])), Err(Error::Shape(_))));
        assert!(Network::new(Arch::default(), 1, 2, Some(ShapeletPool::new(vec![], 1)), 0).is_err());
    }
}
