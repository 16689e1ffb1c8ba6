//! Judging a condensed set by what fresh models learn from it.

mod grid;
mod probe;

pub use grid::{full_grid, grid_search, small_grid, GridEntry};
pub use probe::{pool_probe_accuracy, shapelet_preservation_probe, LinearProbe};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{CondensedSet, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Arch, Network};
use crate::synthesis::init_condensed;
use crate::train::{fit, predict, Labels, TrainConfig, TrainLog};

/// Student optimizer settings: AdamW at 1e-3 for 100 epochs, full batch for
/// up to 256 samples.
pub fn student_config(n: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        weight_decay: 1e-4,
        epochs: 100,
        batch_size: if n <= 256 { n.max(1) } else { 64 },
        seed,
        ..TrainConfig::default()
    }
}

/// Trains a fresh network (no shapelet branch) on the condensed samples with
/// their soft labels.
pub fn train_student(c: &CondensedSet, arch: Arch, cfg: &TrainConfig) -> Result<(Network, TrainLog)> {
    if c.is_empty() {
        return Err(Error::Empty("cannot train a student on an empty condensed set".into()));
    }
    c.validate()?;
    let mut net = Network::new(arch, c.channels, c.num_classes, None, cfg.seed)?;
    let series: Vec<_> = c.items.iter().map(|it| it.series.clone()).collect();
    let soft: Vec<Vec<f64>> = c.items.iter().map(|it| it.soft_label.clone()).collect();
    let log = fit(&mut net, &series, Labels::Soft(&soft), cfg, None)?;
    Ok((net, log))
}

/// The same student trained on a real dataset with hard labels.
pub fn train_full(d: &Dataset, arch: Arch, cfg: &TrainConfig) -> Result<(Network, TrainLog)> {
    let mut net = Network::new(arch, d.channels(), d.num_classes(), None, cfg.seed)?;
    let log = fit(&mut net, d.series(), Labels::Hard(d.labels()), cfg, None)?;
    Ok((net, log))
}

/// Overall and per-class accuracy; classes absent from `test` get `None`.
pub fn evaluate(net: &Network, test: &Dataset) -> Result<(f64, Vec<Option<f64>>)> {
    if test.is_empty() {
        return Err(Error::Empty("cannot evaluate on an empty test set".into()));
    }
    let pred = predict(net, test.series())?;
    let v = test.num_classes();
    let mut hits = vec![0usize; v];
    let mut totals = vec![0usize; v];
    for (p, &y) in pred.iter().zip(test.labels()) {
        totals[y] += 1;
        hits[y] += usize::from(*p == y);
    }
    let overall = hits.iter().sum::<usize>() as f64 / test.len() as f64;
    let per_class = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect();
    Ok((overall, per_class))
}

/// `student / full`, undefined when the full-data model scores zero.
pub fn accuracy_ratio(student: f64, full: f64) -> Option<f64> {
    (full > 0.0).then(|| student / full)
}

/// The reference condenser: `spc` random real samples per class with one-hot
/// labels.
pub fn random_selection(d: &Dataset, spc: usize, seed: u64) -> Result<CondensedSet> {
    init_condensed(d, spc, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub student_accuracy: f64,
    pub full_accuracy: Option<f64>,
    pub accuracy_ratio: Option<f64>,
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Shapelet-preservation probe accuracy, when a pool was supplied.
    pub probe_accuracy: Option<f64>,
    pub student_runs: Vec<f64>,
    pub full_runs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields always serialize") + "\n"
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Trains one student per seed on `c` (and, given `full`, one full-data model
/// per seed) and averages their test accuracies.
pub fn evaluate_condensed(
    c: &CondensedSet,
    test: &Dataset,
    full: Option<&Dataset>,
    arch: Arch,
    seeds: &[u64],
    config: BTreeMap<String, String>,
) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is needed".into()));
    }
    let v = test.num_classes();
    let mut student_runs = Vec::new();
    let mut per_class_sum = vec![0.0; v];
    let mut per_class_n = vec![0usize; v];
    for &seed in seeds {
        let (net, _) = train_student(c, arch, &student_config(c.len(), seed))?;
        let (acc, per_class) = evaluate(&net, test)?;
        student_runs.push(acc);
        for (i, p) in per_class.iter().enumerate() {
            if let Some(p) = p {
                per_class_sum[i] += p;
                per_class_n[i] += 1;
            }
        }
    }
    let mut full_runs = Vec::new();
    if let Some(full) = full {
        for &seed in seeds {
            let (net, _) = train_full(full, arch, &student_config(full.len(), seed))?;
            full_runs.push(evaluate(&net, test)?.0);
        }
    }
    let student_accuracy = mean(&student_runs);
    let full_accuracy = (!full_runs.is_empty()).then(|| mean(&full_runs));
    Ok(EvalReport {
        student_accuracy,
        full_accuracy,
        accuracy_ratio: full_accuracy.and_then(|f| accuracy_ratio(student_accuracy, f)),
        per_class_accuracy: per_class_sum
            .iter()
            .zip(&per_class_n)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect(),
        probe_accuracy: None,
        student_runs,
        full_runs,
        seeds: seeds.to_vec(),
        config,
    })
}
