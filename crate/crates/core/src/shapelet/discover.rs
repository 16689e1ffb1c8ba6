use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::distance::{constrained_match, full_match};
use super::gain::information_gain;
use super::{Candidate, OpCounter, Shapelet, ShapeletPool};
use crate::data::{Dataset, TimeSeries};
use crate::error::{Error, Result};

/// Parameters of the fast discovery pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryConfig {
    /// Fraction `p` of series excluded before candidate generation and scoring.
    pub prune_ratio: f64,
    /// Half-width `W` of the alignment window; `2W + 1` positions per evaluation.
    pub window: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Step between candidate lengths.
    pub length_stride: usize,
    /// Pool size `k`.
    pub k: usize,
    pub seed: u64,
    /// Score candidates against every series instead of the retained subset.
    pub score_full: bool,
}

impl DiscoveryConfig {
    /// Defaults for series of length `series_len`: lengths from L/8 to L/2 in
    /// four steps, a one-position window, half of the series pruned.
    pub fn for_length(series_len: usize) -> Self {
        let min_len = (series_len / 8).max(1);
        let max_len = (series_len / 2).max(min_len);
        Self {
            prune_ratio: 0.5,
            window: 1,
            min_len,
            max_len,
            length_stride: default_stride(min_len, max_len),
            k: 10,
            seed: 0,
            score_full: false,
        }
    }

    /// Replaces the candidate-length range, resetting the stride to its default.
    pub fn with_lengths(mut self, min_len: usize, max_len: usize) -> Self {
        self.min_len = min_len;
        self.max_len = max_len;
        self.length_stride = if min_len <= max_len { default_stride(min_len, max_len) } else { 1 };
        self
    }

    pub fn validate(&self, series_len: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.prune_ratio) {
            return Err(Error::Config(format!(
                "prune ratio {} must lie in [0, 1)",
                self.prune_ratio
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("pool size k must be at least 1".into()));
        }
        if self.length_stride == 0 {
            return Err(Error::Config("length stride must be at least 1".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "candidate lengths [{}, {}] are not a valid range",
                self.min_len, self.max_len
            )));
        }
        if self.max_len > series_len {
            return Err(Error::Config(format!(
                "maximum candidate length {} exceeds series length {series_len}",
                self.max_len
            )));
        }
        Ok(())
    }

    /// Candidate lengths: `min_len, min_len + stride, …`, always ending at `max_len`.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (self.min_len..=self.max_len)
            .step_by(self.length_stride.max(1))
            .collect();
        if out.last() != Some(&self.max_len) {
            out.push(self.max_len);
        }
        out
    }
}

/// `max(1, round((max - min) / 4))`.
pub(crate) fn default_stride(min_len: usize, max_len: usize) -> usize {
    (((max_len - min_len) as f64 / 4.0).round() as usize).max(1)
}

/// Seeded uniform sample of `⌈(1 − p)·N⌉` series indices, ascending.
pub fn retained_series(n: usize, prune_ratio: f64, seed: u64) -> Vec<usize> {
    // The epsilon keeps e.g. (1 - 0.7) * 10 from rounding up to 4.
    let keep = (((1.0 - prune_ratio) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    if keep == n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, keep).into_vec();
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, Copy)]
struct CandidateRef {
    series: usize,
    channel: usize,
    position: usize,
    len: usize,
}

impl CandidateRef {
    fn materialize(&self, d: &Dataset) -> Candidate {
        let x = d.series()[self.series].channel(self.channel);
        Candidate {
            series_index: Some(self.series),
            channel: self.channel,
            position: self.position,
            values: x[self.position..self.position + self.len].to_vec(),
        }
    }
}

fn candidate_refs(d: &Dataset, series: &[usize], lengths: &[usize]) -> Vec<CandidateRef> {
    let l_total = d.length();
    let mut refs = Vec::new();
    for &s in series {
        for channel in 0..d.channels() {
            for &len in lengths {
                for position in 0..=l_total - len {
                    refs.push(CandidateRef {
                        series: s,
                        channel,
                        position,
                        len,
                    });
                }
            }
        }
    }
    refs
}

/// Every candidate the pruned enumeration generates, in generation order.
pub fn enumerate_candidates(
    d: &Dataset,
    cfg: &DiscoveryConfig,
    counter: &mut OpCounter,
) -> Result<Vec<Candidate>> {
    cfg.validate(d.length())?;
    let retained = retained_series(d.len(), cfg.prune_ratio, cfg.seed);
    let refs = candidate_refs(d, &retained, &cfg.lengths());
    counter.candidates_generated += refs.len() as u64;
    Ok(refs.iter().map(|r| r.materialize(d)).collect())
}

struct Scored {
    candidate: CandidateRef,
    score: f64,
    threshold: f64,
}

/// Scores every candidate with `distance`, then keeps the top `k` under the
/// (score desc, series, channel, position, length) order.
fn score_and_select<F>(
    d: &Dataset,
    refs: Vec<CandidateRef>,
    scoring: &[usize],
    k: usize,
    window: usize,
    distance: F,
) -> Result<(ShapeletPool, OpCounter)>
where
    F: Fn(&Candidate, &TimeSeries, &mut OpCounter) -> Result<f64> + Sync,
{
    let labels: Vec<usize> = scoring.iter().map(|&i| d.labels()[i]).collect();
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::Degenerate(
            "the scoring subset contains a single class".into(),
        ));
    }
    let generated = refs.len() as u64;

    let results: Vec<(Scored, OpCounter)> = refs
        .into_par_iter()
        .map(|r| {
            let cand = r.materialize(d);
            let mut local = OpCounter::new();
            let dists = scoring
                .iter()
                .map(|&i| distance(&cand, &d.series()[i], &mut local))
                .collect::<Result<Vec<f64>>>()?;
            let (score, threshold) = information_gain(&dists, &labels, d.num_classes())?;
            Ok((
                Scored {
                    candidate: r,
                    score,
                    threshold,
                },
                local,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counter = OpCounter {
        candidates_generated: generated,
        ..OpCounter::default()
    };
    let mut scored = Vec::with_capacity(results.len());
    for (s, c) in results {
        counter += c;
        scored.push(s);
    }
    counter.candidates_generated = generated;

    scored.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| {
            let ka = (a.candidate.series, a.candidate.channel, a.candidate.position, a.candidate.len);
            let kb = (b.candidate.series, b.candidate.channel, b.candidate.position, b.candidate.len);
            ka.cmp(&kb)
        })
    });
    scored.truncate(k);
    let shapelets = scored
        .into_iter()
        .map(|s| Shapelet {
            candidate: s.candidate.materialize(d),
            score: s.score,
            threshold: s.threshold,
        })
        .collect();
    Ok((ShapeletPool::new(shapelets, window), counter))
}

fn check_classes(d: &Dataset) -> Result<()> {
    if d.num_classes() < 2 {
        return Err(Error::Degenerate("discovery needs at least two classes".into()));
    }
    Ok(())
}

/// Fast discovery: candidates from a pruned sample of series, scored with the
/// position-constrained distance.
pub fn discover(d: &Dataset, cfg: &DiscoveryConfig) -> Result<(ShapeletPool, OpCounter)> {
    cfg.validate(d.length())?;
    check_classes(d)?;
    let retained = retained_series(d.len(), cfg.prune_ratio, cfg.seed);
    let scoring: Vec<usize> = if cfg.score_full {
        (0..d.len()).collect()
    } else {
        retained.clone()
    };
    let refs = candidate_refs(d, &retained, &cfg.lengths());
    let window = cfg.window;
    score_and_select(d, refs, &scoring, cfg.k, window, move |c, x, counter| {
        constrained_match(c, x, window, counter).map(|m| m.distance)
    })
}

/// Classical discovery: every candidate of every series, scored against every
/// series with the unconstrained distance. Pruning and the window are ignored;
/// the returned pool records `window = series length`.
pub fn discover_full_scan(d: &Dataset, cfg: &DiscoveryConfig) -> Result<(ShapeletPool, OpCounter)> {
    cfg.validate(d.length())?;
    check_classes(d)?;
    let all: Vec<usize> = (0..d.len()).collect();
    let refs = candidate_refs(d, &all, &cfg.lengths());
    score_and_select(d, refs, &all, cfg.k, d.length(), |c, x, counter| {
        full_match(c, x, counter).map(|m| m.distance)
    })
}
