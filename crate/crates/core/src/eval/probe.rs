use crate::data::{argmax, CondensedSet, Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::shapelet::{shapelet_transform, ShapeletPool};
use crate::tensor::{cross_entropy, Adam, Target, Tensor};

const PROBE_EPOCHS: usize = 300;
const PROBE_LR: f64 = 0.05;

/// Softmax-linear classifier on standardized shapelet features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weight: Tensor,
    bias: Tensor,
}

impl LinearProbe {
    /// Full-batch Adam from zero weights on the mean cross-entropy.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Self> {
        let n = features.len();
        let k = features.first().map_or(0, Vec::len);
        if n == 0 || k == 0 || labels.len() != n {
            return Err(Error::Shape(format!("probe given {n} rows of {k} features and {} labels", labels.len())));
        }
        let mut present = vec![false; num_classes];
        labels.iter().for_each(|&y| present[y] = true);
        if present.iter().filter(|&&p| p).count() < 2 {
            return Err(Error::Degenerate("probe needs at least two classes".into()));
        }
        let mut mean = vec![0.0; k];
        for f in features {
            mean.iter_mut().zip(f).for_each(|(m, v)| *m += v / n as f64);
        }
        let mut scale = vec![0.0; k];
        for f in features {
            scale.iter_mut().zip(f).zip(&mean).for_each(|((s, v), m)| *s += (v - m) * (v - m) / n as f64);
        }
        scale.iter_mut().for_each(|s| *s = if s.sqrt() < 1e-8 { 1.0 } else { s.sqrt() });
        let mut probe = Self {
            mean,
            scale,
            weight: Tensor::zeros(&[num_classes, k]),
            bias: Tensor::zeros(&[num_classes]),
        };
        let x = probe.standardize(features)?;
        let mut opt = Adam::new(PROBE_LR, 0.9, 0.999, 0.0);
        for _ in 0..PROBE_EPOCHS {
            let logits = crate::tensor::linear_forward(&x, &probe.weight, &probe.bias)?;
            let (_, g) = cross_entropy(&logits, Target::Hard(labels))?;
            let grads = crate::tensor::linear_backward(&x, &probe.weight, &g)?;
            probe.weight.accumulate_grad(grads.weight.data())?;
            probe.bias.accumulate_grad(grads.bias.data())?;
            opt.step(&mut [&mut probe.weight, &mut probe.bias]);
        }
        Ok(probe)
    }

    fn standardize(&self, features: &[Vec<f64>]) -> Result<Tensor> {
        let k = self.mean.len();
        let mut data = Vec::with_capacity(features.len() * k);
        for f in features {
            if f.len() != k {
                return Err(Error::Shape(format!("probe expects {k} features, got {}", f.len())));
            }
            data.extend(f.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s));
        }
        Tensor::new(&[features.len(), k], data)
    }

    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<usize>> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        let logits = crate::tensor::linear_forward(&self.standardize(features)?, &self.weight, &self.bias)?;
        Ok(logits.data().chunks(self.bias.numel()).map(argmax).collect())
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if features.is_empty() {
            return Err(Error::Empty("probe scored on nothing".into()));
        }
        let pred = self.predict(features)?;
        Ok(pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64)
    }
}

fn features(series: &[TimeSeries], pool: &ShapeletPool) -> Result<Vec<Vec<f64>>> {
    series.iter().map(|s| shapelet_transform(s, pool, pool.window())).collect()
}

/// Fits the probe on the shapelet features of `full` and scores it on the
/// condensed samples against their argmax soft labels.
pub fn shapelet_preservation_probe(full: &Dataset, c: &CondensedSet, pool: &ShapeletPool) -> Result<f64> {
    let probe = LinearProbe::fit(&features(full.series(), pool)?, full.labels(), full.num_classes())?;
    let series: Vec<TimeSeries> = c.items.iter().map(|it| it.series.clone()).collect();
    probe.accuracy(&features(&series, pool)?, &c.hard_labels())
}

/// Held-out accuracy of a probe fitted on `train`'s shapelet features; a
/// measure of how much class information a pool carries.
pub fn pool_probe_accuracy(train: &Dataset, test: &Dataset, pool: &ShapeletPool) -> Result<f64> {
    let probe = LinearProbe::fit(&features(train.series(), pool)?, train.labels(), train.num_classes())?;
    probe.accuracy(&features(test.series(), pool)?, test.labels())
}
