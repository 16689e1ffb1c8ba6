use super::{Candidate, OpCounter};
use crate::data::TimeSeries;
use crate::error::{Error, Result};

/// Best alignment of a shapelet against one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub distance: f64,
    /// Start of the best-matching window; ties go to the smallest position.
    pub position: usize,
}

/// Euclidean distance between two equal-length slices.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared(a, b).sqrt()
}

#[inline]
fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn channel_for<'a>(s: &Candidate, x: &'a TimeSeries) -> Result<&'a [f64]> {
    if s.channel >= x.channels() {
        return Err(Error::Shape(format!(
            "shapelet channel {} but series has {} channels",
            s.channel,
            x.channels()
        )));
    }
    if s.is_empty() || s.len() > x.len() {
        return Err(Error::Shape(format!(
            "shapelet of length {} cannot align with a series of length {}",
            s.len(),
            x.len()
        )));
    }
    Ok(x.channel(s.channel))
}

/// Scans start positions `lo..=hi` and returns the closest window.
fn scan(values: &[f64], x: &[f64], lo: usize, hi: usize, counter: &mut OpCounter) -> Match {
    let l = values.len();
    let mut best = Match {
        distance: f64::INFINITY,
        position: lo,
    };
    for pos in lo..=hi {
        let d = squared(values, &x[pos..pos + l]);
        if d < best.distance {
            best = Match {
                distance: d,
                position: pos,
            };
        }
    }
    counter.distance_evals += 1;
    counter.alignment_ops += (hi - lo + 1) as u64;
    best.distance = best.distance.sqrt();
    best
}

/// Minimum distance over windows starting within `window` positions of the
/// candidate's own start position.
pub fn constrained_match(
    s: &Candidate,
    x: &TimeSeries,
    window: usize,
    counter: &mut OpCounter,
) -> Result<Match> {
    let xc = channel_for(s, x)?;
    Ok(window_match(&s.values, xc, s.position, window, counter))
}

/// Constrained match on raw slices; `values.len() <= x.len()` must hold.
pub(crate) fn window_match(
    values: &[f64],
    x: &[f64],
    position: usize,
    window: usize,
    counter: &mut OpCounter,
) -> Match {
    let last = x.len() - values.len();
    let centre = position.min(last);
    let lo = centre.saturating_sub(window);
    let hi = centre.saturating_add(window).min(last);
    scan(values, x, lo, hi, counter)
}

pub fn constrained_distance(
    s: &Candidate,
    x: &TimeSeries,
    window: usize,
    counter: &mut OpCounter,
) -> Result<f64> {
    constrained_match(s, x, window, counter).map(|m| m.distance)
}

/// Classical shapelet distance: minimum over every alignment.
pub fn full_match(s: &Candidate, x: &TimeSeries, counter: &mut OpCounter) -> Result<Match> {
    let xc = channel_for(s, x)?;
    Ok(scan(&s.values, xc, 0, x.len() - s.len(), counter))
}

pub fn full_distance(s: &Candidate, x: &TimeSeries, counter: &mut OpCounter) -> Result<f64> {
    full_match(s, x, counter).map(|m| m.distance)
}
