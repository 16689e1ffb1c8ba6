//! Operation-counted comparison of fast and classical shapelet discovery.

use std::fmt::Write as _;
use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::shapelet::{discover, discover_full_scan, DiscoveryConfig, OpCounter};

/// Upper bound on reference-scan alignment operations for [`run_bench`].
pub const REFERENCE_OP_LIMIT: u128 = 1_000_000_000;

/// Parameters of the analytic cost model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Number of series.
    pub n: usize,
    /// Alignment positions of a full scan.
    pub l: usize,
    /// Candidate count before pruning.
    pub m: usize,
    /// Pruning ratio.
    pub p: f64,
    /// Positions per constrained evaluation, `2W + 1`.
    pub c: usize,
    /// Pool size.
    pub k: usize,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 || self.m == 0 || self.c == 0 || self.k == 0 {
            return Err(Error::Config("cost-model sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::Config(format!("pruning ratio {} must lie in [0, 1)", self.p)));
        }
        Ok(())
    }
}

/// Predicted speed-up of fast discovery: `L / (c (1 - p)^2)`.
pub fn predict_ratio(m: &CostModel) -> f64 {
    m.l as f64 / (m.c as f64 * (1.0 - m.p).powi(2))
}

/// Alignment operations of the classical scan over `d` with `cfg`'s lengths.
pub fn reference_ops_estimate(d: &Dataset, cfg: &DiscoveryConfig) -> u128 {
    let n = d.len() as u128;
    let c = d.channels() as u128;
    cfg.lengths()
        .iter()
        .map(|&l| {
            let positions = (d.length() + 1).saturating_sub(l) as u128;
            n * c * positions * n * positions
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub n: usize,
    pub series_len: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub prune_ratio: f64,
    /// Positions per constrained evaluation.
    pub c: usize,
    pub reference: OpCounter,
    pub fast: OpCounter,
    pub measured_ratio: f64,
    pub predicted_ratio: f64,
    pub reference_seconds: f64,
    pub fast_seconds: f64,
}

impl BenchResult {
    pub const CSV_HEADER: &'static str =
        "N,L,l,p,c,ref_ops,fast_ops,measured_ratio,predicted_ratio,ref_seconds,fast_seconds";

    pub fn csv_row(&self) -> String {
        let l = if self.min_len == self.max_len {
            self.min_len.to_string()
        } else {
            format!("{}-{}", self.min_len, self.max_len)
        };
        let mut out = String::new();
        let _ = write!(
            out,
            "{},{},{l},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.n,
            self.series_len,
            self.prune_ratio,
            self.c,
            self.reference.alignment_ops,
            self.fast.alignment_ops,
            self.measured_ratio,
            self.predicted_ratio,
            self.reference_seconds,
            self.fast_seconds
        );
        out
    }
}

/// Runs classical and fast discovery with counters and compares the measured
/// alignment-op ratio with the cost model. The prediction uses the mean
/// number of full-scan positions over the candidate lengths.
pub fn run_bench(d: &Dataset, cfg: &DiscoveryConfig) -> Result<BenchResult> {
    cfg.validate(d.length())?;
    let estimate = reference_ops_estimate(d, cfg);
    if estimate > REFERENCE_OP_LIMIT {
        return Err(Error::TooLarge {
            estimate,
            limit: REFERENCE_OP_LIMIT,
        });
    }
    let start = Instant::now();
    let (_, reference) = discover_full_scan(d, cfg)?;
    let reference_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let (_, fast) = discover(d, cfg)?;
    let fast_seconds = start.elapsed().as_secs_f64();

    let lengths = cfg.lengths();
    let positions: f64 =
        lengths.iter().map(|&l| (d.length() - l + 1) as f64).sum::<f64>() / lengths.len() as f64;
    let c = 2 * cfg.window + 1;
    let predicted_ratio = positions / (c as f64 * (1.0 - cfg.prune_ratio).powi(2));
    Ok(BenchResult {
        n: d.len(),
        series_len: d.length(),
        min_len: cfg.min_len,
        max_len: cfg.max_len,
        prune_ratio: cfg.prune_ratio,
        c,
        reference,
        fast,
        measured_ratio: reference.alignment_ops as f64 / fast.alignment_ops.max(1) as f64,
        predicted_ratio,
        reference_seconds,
        fast_seconds,
    })
}
