//! Condensed-set synthesis by inverting a frozen teacher.
//!
//! The condensed sequences are optimized with Adam against the teacher's
//! cross-entropy on their initial labels plus a penalty pulling each
//! batch-norm layer's batch statistics towards the teacher's running
//! statistics. Afterwards every sample is relabelled with the teacher's
//! predicted class probabilities.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{one_hot, quantize, CondensedItem, CondensedSet, Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::nn::{batch_tensor, BackwardOptions};
use crate::teacher::TeacherModel;
use crate::tensor::{cross_entropy, softmax, Adam, BnMode, Target, Tensor};

/// Where the optimized sequences start from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Randomly chosen real samples of each class.
    Real,
    /// Standard Gaussian noise.
    Noise,
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::Real => "real",
            Init::Noise => "noise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(Init::Real),
            "noise" => Some(Init::Noise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub spc: usize,
    pub iterations: usize,
    pub lr: f64,
    pub betas: (f64, f64),
    /// Weight of the batch-norm statistics penalty.
    pub bn_weight: f64,
    pub seed: u64,
    pub init: Init,
    /// When set, the teacher's pool must hash to this value.
    pub expected_pool_hash: Option<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            spc: 10,
            iterations: 2000,
            lr: 0.2,
            betas: (0.5, 0.9),
            bn_weight: 1.0,
            seed: 0,
            init: Init::Real,
            expected_pool_hash: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spc == 0 {
            return Err(Error::Config("samples per class must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(self.bn_weight >= 0.0 && self.bn_weight.is_finite()) {
            return Err(Error::Config("batch-norm weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// `spc` seeded picks per class from `d`, labelled one-hot, class by class.
pub fn init_condensed(d: &Dataset, spc: usize, seed: u64) -> Result<CondensedSet> {
    if spc == 0 {
        return Err(Error::Config("samples per class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(spc * d.num_classes());
    for (class, members) in d.class_members().iter().enumerate() {
        if members.len() < spc {
            return Err(Error::Insufficient(format!(
                "class {} has {} samples, fewer than {spc} per class",
                d.label_names()[class],
                members.len()
            )));
        }
        let mut picks = rand::seq::index::sample(&mut rng, members.len(), spc).into_vec();
        picks.sort_unstable();
        for p in picks {
            items.push(CondensedItem {
                series: d.series()[members[p]].clone(),
                soft_label: one_hot(class, d.num_classes()),
            });
        }
    }
    Ok(CondensedSet {
        items,
        spc,
        num_classes: d.num_classes(),
        channels: d.channels(),
        length: d.length(),
        label_names: d.label_names().to_vec(),
    })
}

/// Like [`init_condensed`] but every sequence is standard Gaussian noise.
pub fn init_noise(d: &Dataset, spc: usize, seed: u64) -> Result<CondensedSet> {
    let mut c = init_condensed(d, spc, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0015_e5ee);
    for item in &mut c.items {
        let n = item.series.values().len();
        let values: Vec<f64> = (0..n).map(|_| quantize(StandardNormal.sample(&mut rng))).collect();
        item.series = TimeSeries::new(values, c.channels)?;
    }
    Ok(c)
}

type Stats<'a> = [(&'a [f64], &'a [f64])];

fn check_layers(batch: &Stats<'_>, teacher: &Stats<'_>) -> Result<()> {
    if batch.len() != teacher.len() {
        return Err(Error::Shape(format!(
            "{} batch-norm layers against {} teacher layers",
            batch.len(),
            teacher.len()
        )));
    }
    for (i, ((bm, bv), (tm, tv))) in batch.iter().zip(teacher).enumerate() {
        if bm.len() != tm.len() || bv.len() != tv.len() || bm.len() != bv.len() {
            return Err(Error::Shape(format!("layer {i} statistics differ in width")));
        }
    }
    Ok(())
}

/// `Σ_l ‖μ_l − μ_l^BN‖² + ‖σ²_l − σ²_l^BN‖²` over aligned layers.
pub fn bn_regularizer(batch: &Stats<'_>, teacher: &Stats<'_>) -> Result<f64> {
    check_layers(batch, teacher)?;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    Ok(batch
        .iter()
        .zip(teacher)
        .map(|((bm, bv), (tm, tv))| sq(bm, tm) + sq(bv, tv))
        .sum())
}

/// Gradient of `weight · bn_regularizer` with respect to each layer's batch
/// mean and variance.
pub fn bn_regularizer_grads(batch: &Stats<'_>, teacher: &Stats<'_>, weight: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    check_layers(batch, teacher)?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 2.0 * weight * (x - y)).collect();
    Ok(batch
        .iter()
        .zip(teacher)
        .map(|((bm, bv), (tm, tv))| (diff(bm, tm), diff(bv, tv)))
        .collect())
}

/// One row of the synthesis loss trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthStep {
    pub iteration: usize,
    pub task_loss: f64,
    pub bn_loss: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthLog {
    /// Objective before each update, then once more for the returned set.
    pub steps: Vec<SynthStep>,
}

impl SynthLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,task_loss,bn_loss,total\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", s.iteration, s.task_loss, s.bn_loss, s.total);
        }
        out
    }
}

fn objective(
    teacher: &TeacherModel,
    x: &Tensor,
    labels: &[usize],
    weight: f64,
    running: &Stats<'_>,
) -> Result<(crate::nn::Trace, Tensor, SynthStep)> {
    let trace = teacher.net.forward(x, BnMode::BatchStats)?;
    let (task, grad) = cross_entropy(&trace.logits, Target::Hard(labels))?;
    let bn = bn_regularizer(&trace.bn_batch_stats(), running)?;
    let step = SynthStep {
        iteration: 0,
        task_loss: task,
        bn_loss: bn,
        total: task + weight * bn,
    };
    Ok((trace, grad, step))
}

/// Optimizes the sequences of `c` against `teacher` and relabels them.
pub fn synthesize(teacher: &TeacherModel, c: &CondensedSet, cfg: &SynthConfig) -> Result<(CondensedSet, SynthLog)> {
    cfg.validate()?;
    if let Some(expected) = &cfg.expected_pool_hash {
        let actual = teacher.pool_hash();
        if &actual != expected {
            return Err(Error::Integrity(format!("teacher pool hash {actual} differs from {expected}")));
        }
    }
    c.validate()?;
    if c.is_empty() {
        return Err(Error::Empty("nothing to synthesize".into()));
    }
    if c.channels != teacher.net.in_channels() || c.num_classes != teacher.net.num_classes() {
        return Err(Error::Shape(format!(
            "condensed set ({} channels, {} classes) does not fit the teacher ({} channels, {} classes)",
            c.channels,
            c.num_classes,
            teacher.net.in_channels(),
            teacher.net.num_classes()
        )));
    }
    let labels = c.hard_labels();
    let bn_layers = teacher.net.bn_layers();
    let running: Vec<(&[f64], &[f64])> = bn_layers
        .iter()
        .map(|bn| (bn.state.running_mean.as_slice(), bn.state.running_var.as_slice()))
        .collect();

    let mut x = batch_tensor(c.items.iter().map(|it| &it.series))?;
    let mut opt = Adam::new(cfg.lr, cfg.betas.0, cfg.betas.1, 0.0);
    let mut log = SynthLog::default();
    for iteration in 0..cfg.iterations {
        let (trace, grad, mut step) = objective(teacher, &x, &labels, cfg.bn_weight, &running)?;
        step.iteration = iteration;
        if !step.total.is_finite() {
            return Err(Error::Divergence {
                epoch: iteration,
                loss: step.total,
            });
        }
        log.steps.push(step);
        let stat_grads = if cfg.bn_weight > 0.0 {
            Some(bn_regularizer_grads(&trace.bn_batch_stats(), &running, cfg.bn_weight)?)
        } else {
            None
        };
        let g = teacher.net.backward(
            &trace,
            &grad,
            BackwardOptions {
                input_grad: true,
                param_grads: false,
                stat_grads: stat_grads.as_deref(),
            },
        )?;
        x.accumulate_grad(g.input.expect("input gradient requested").data())?;
        opt.step(&mut [&mut x]);
        if iteration % 200 == 0 {
            log::debug!(
                "iteration {iteration}: task {:.6} bn {:.6}",
                step.task_loss,
                step.bn_loss
            );
        }
    }

    // What gets written is what gets scored and relabelled.
    x.data_mut().iter_mut().for_each(|v| *v = quantize(*v));
    let (_, _, mut last) = objective(teacher, &x, &labels, cfg.bn_weight, &running)?;
    last.iteration = cfg.iterations;
    if !last.total.is_finite() {
        return Err(Error::Divergence {
            epoch: cfg.iterations,
            loss: last.total,
        });
    }
    log.steps.push(last);

    let logits = teacher.net.predict(&x)?;
    let per = c.channels * c.length;
    let v = c.num_classes;
    let items = x
        .data()
        .chunks(per)
        .zip(logits.data().chunks(v))
        .map(|(values, z)| {
            Ok(CondensedItem {
                series: TimeSeries::new(values.to_vec(), c.channels)?,
                soft_label: softmax(z).into_iter().map(quantize).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = CondensedSet {
        items,
        ..c.clone()
    };
    out.validate()?;
    Ok((out, log))
}
