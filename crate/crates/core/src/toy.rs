//! Planted-motif toy datasets.

use std::fmt::Write as _;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{quantize, Dataset, TimeSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub classes: usize,
    pub n: usize,
    pub len: usize,
    /// Width of class 1's bump; class `c` uses `motif_len * (1 + c) / 2`.
    pub motif_len: usize,
    /// Maximum shift of a motif from its class's base position.
    pub jitter: usize,
    pub noise_sigma: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            classes: 2,
            n: 200,
            len: 128,
            motif_len: 16,
            jitter: 4,
            noise_sigma: 0.5,
            amplitude: 3.0,
            seed: 0,
        }
    }
}

/// Where a motif was planted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotifRecord {
    pub index: usize,
    pub class: usize,
    pub position: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub dataset: Dataset,
    pub motifs: Vec<MotifRecord>,
}

impl ToyData {
    /// Tab-separated `index class position width` lines with a header.
    pub fn motif_sidecar(&self) -> String {
        let mut out = String::from("index\tclass\tposition\twidth\n");
        for m in &self.motifs {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", m.index, m.class, m.position, m.width);
        }
        out
    }
}

/// Width of class `class`'s motif; class 0 has none.
pub fn motif_width(cfg: &ToyConfig, class: usize) -> usize {
    cfg.motif_len * (1 + class) / 2 * usize::from(class > 0)
}

/// Nominal start of class `class`'s motif, before jitter. Motifs are centred
/// in the series.
pub fn motif_base(cfg: &ToyConfig, class: usize) -> usize {
    (cfg.len - motif_width(cfg, class)) / 2
}

/// Raised-cosine bump of the given width, peak 1.
pub fn bump(width: usize) -> Vec<f64> {
    if width == 1 {
        return vec![1.0];
    }
    (0..width)
        .map(|t| 0.5 * (1.0 - (2.0 * PI * t as f64 / (width - 1) as f64).cos()))
        .collect()
}

/// Series `i` belongs to class `i mod classes`. Class 0 is plain Gaussian
/// noise; every other class adds its own bump at a jittered position.
pub fn gen_toy(cfg: &ToyConfig) -> Result<ToyData> {
    if cfg.classes < 2 || cfg.n == 0 || cfg.motif_len < 2 {
        return Err(Error::Config(
            "a toy needs at least 2 classes, 1 series and a 2-step motif".into(),
        ));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::Config("noise sigma must be a finite non-negative number".into()));
    }
    let widest = motif_width(cfg, cfg.classes - 1);
    if widest + 2 * cfg.jitter > cfg.len {
        return Err(Error::Config(format!(
            "a {widest}-step motif with jitter {} does not fit in {} steps",
            cfg.jitter, cfg.len
        )));
    }
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut series = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    let mut motifs = Vec::with_capacity(cfg.n);
    for index in 0..cfg.n {
        let class = index % cfg.classes;
        let width = motif_width(cfg, class);
        let mut values: Vec<f64> = (0..cfg.len).map(|_| noise.sample(&mut rng)).collect();
        let shift = rng.random_range(0..=2 * cfg.jitter);
        let position = motif_base(cfg, class) + shift - cfg.jitter;
        if width > 0 {
            for (t, b) in bump(width).into_iter().enumerate() {
                values[position + t] += cfg.amplitude * b;
            }
            motifs.push(MotifRecord {
                index,
                class,
                position,
                width,
            });
        }
        series.push(TimeSeries::univariate(values.into_iter().map(quantize).collect())?);
        labels.push(class);
    }
    Ok(ToyData {
        dataset: Dataset::new(series, labels, cfg.classes, vec![])?,
        motifs,
    })
}
