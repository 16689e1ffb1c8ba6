//! Supervised training loop shared by the teacher and the students.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{argmax, Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::nn::{batch_tensor, BackwardOptions, Network};
use crate::tensor::{cross_entropy, softmax, Adam, BnMode, Target, Tensor};

/// Optimizer and schedule for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-4,
            betas: (0.9, 0.999),
            epochs: 100,
            batch_size: 64,
            seed: 0,
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be a finite non-negative number", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Training targets, one per series.
#[derive(Debug, Clone, Copy)]
pub enum Labels<'a> {
    Hard(&'a [usize]),
    Soft(&'a [Vec<f64>]),
}

impl Labels<'_> {
    fn len(&self) -> usize {
        match self {
            Labels::Hard(y) => y.len(),
            Labels::Soft(y) => y.len(),
        }
    }
}

/// What happened during [`fit`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Mean training loss of each epoch, measured before that epoch's updates
    /// on each batch.
    pub losses: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Epoch whose parameters were kept when validating.
    pub best_epoch: Option<usize>,
}

fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    // A trailing singleton gives batch norm nothing to normalize over.
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Mini-batch AdamW on mean cross-entropy. With a validation set, training
/// stops after `patience` epochs without improvement and the parameters of
/// the best epoch (the latest one, among ties) are restored.
pub fn fit(
    net: &mut Network,
    series: &[TimeSeries],
    labels: Labels<'_>,
    cfg: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::Empty("no training series".into()));
    }
    if labels.len() != series.len() {
        return Err(Error::Shape(format!("{} labels for {} series", labels.len(), series.len())));
    }
    let v = net.num_classes();
    let mut opt = Adam::new(cfg.lr, cfg.betas.0, cfg.betas.1, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Network)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for idx in batches(series.len(), cfg.batch_size, &mut rng) {
            let x = batch_tensor(idx.iter().map(|&i| &series[i]))?;
            let trace = net.forward(&x, BnMode::Train)?;
            let (loss, grad) = match labels {
                Labels::Hard(y) => {
                    let y: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
                    cross_entropy(&trace.logits, Target::Hard(&y))?
                }
                Labels::Soft(y) => {
                    let flat: Vec<f64> = idx.iter().flat_map(|&i| y[i].iter().copied()).collect();
                    if flat.len() != idx.len() * v {
                        return Err(Error::Shape(format!("soft labels must have {v} entries")));
                    }
                    cross_entropy(&trace.logits, Target::Soft(&flat))?
                }
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * idx.len() as f64;
            let grads = net.backward(
                &trace,
                &grad,
                BackwardOptions {
                    param_grads: true,
                    ..Default::default()
                },
            )?;
            net.accumulate(&grads)?;
            net.update_running(&trace);
            opt.step(&mut net.parameters_mut());
        }
        let epoch_loss = total / series.len() as f64;
        log::debug!("epoch {epoch}: loss {epoch_loss:.6}");
        log.losses.push(epoch_loss);

        if let Some(val) = validation {
            let acc = accuracy(net, val)?;
            log.val_accuracy.push(acc);
            // Ties keep the later epoch but do not reset the patience count.
            let previous = best.as_ref().map(|(b, _)| *b);
            if previous.is_none_or(|b| acc >= b) {
                best = Some((acc, net.clone()));
                log.best_epoch = Some(epoch);
            }
            if previous.is_none_or(|b| acc > b) {
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    log::debug!("validation plateau after epoch {epoch}");
                    break;
                }
            }
        }
    }
    if let Some((_, b)) = best {
        *net = b;
    }
    Ok(log)
}

const EVAL_BATCH: usize = 256;

/// Eval-mode logits for every series, in order.
pub fn predict_logits(net: &Network, series: &[TimeSeries]) -> Result<Vec<Vec<f64>>> {
    let v = net.num_classes();
    let mut out = Vec::with_capacity(series.len());
    for chunk in series.chunks(EVAL_BATCH) {
        let logits: Tensor = net.predict(&batch_tensor(chunk)?)?;
        out.extend(logits.data().chunks(v).map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Eval-mode class probabilities for every series.
pub fn predict_proba(net: &Network, series: &[TimeSeries]) -> Result<Vec<Vec<f64>>> {
    Ok(predict_logits(net, series)?.iter().map(|z| softmax(z)).collect())
}

/// Argmax predictions; ties go to the lowest class id.
pub fn predict(net: &Network, series: &[TimeSeries]) -> Result<Vec<usize>> {
    Ok(predict_logits(net, series)?.iter().map(|z| argmax(z)).collect())
}

/// Fraction of correctly classified series.
pub fn accuracy(net: &Network, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Empty("cannot score an empty test set".into()));
    }
    let pred = predict(net, d.series())?;
    let correct = pred.iter().zip(d.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / d.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Arch;

    fn toy() -> Dataset {
        // Class 1 has a bump, class 0 is flat.
        let mut series = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let y = i % 2;
            let v: Vec<f64> = (0..16)
                .map(|t| {
                    let bump = if y == 1 && (6..10).contains(&t) { 2.0 } else { 0.0 };
                    bump + 0.05 * (((i * 31 + t * 7) % 13) as f64 - 6.0)
                })
                .collect();
            series.push(TimeSeries::univariate(v).unwrap());
            labels.push(y);
        }
        Dataset::new(series, labels, 2, vec![]).unwrap()
    }

    #[test]
    fn singleton_tail_is_merged() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = batches(9, 4, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(batches(1, 4, &mut rng).len(), 1);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_alone() {
        let d = toy();
        let mut net = Network::new(Arch::default(), 1, 2, None, 0).unwrap();
        let before: Vec<Tensor> = net.parameters().into_iter().map(|(_, t)| t.clone()).collect();
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        fit(&mut net, d.series(), Labels::Hard(d.labels()), &cfg, None).unwrap();
        let after: Vec<Tensor> = net.parameters().into_iter().map(|(_, t)| t.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn fits_a_separable_set_deterministically() {
        let d = toy();
        let cfg = TrainConfig {
            lr: 1e-2,
            epochs: 30,
            batch_size: 12,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = Network::new(Arch::default(), 1, 2, None, 7).unwrap();
            let log = fit(&mut net, d.series(), Labels::Hard(d.labels()), &cfg, None).unwrap();
            (net, log)
        };
        let (a, log) = run();
        let (b, _) = run();
        assert_eq!(a, b);
        assert_eq!(accuracy(&a, &d).unwrap(), 1.0);
        assert!(log.losses.last().unwrap() < &log.losses[0]);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let net = Network::new(Arch::default(), 1, 2, None, 0).unwrap();
        let empty = Dataset::new(vec![], vec![], 2, vec![]);
        if let Ok(empty) = empty {
            assert!(accuracy(&net, &empty).is_err());
        }
    }
}
