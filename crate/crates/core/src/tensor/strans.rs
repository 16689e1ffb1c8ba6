use super::Tensor;
use crate::error::{Error, Result};
use crate::shapelet::{window_match, OpCounter, ShapeletPool};

/// Distances at or below this are treated as exact matches in the backward
/// pass, where the norm has no derivative.
pub const DISTANCE_EPS: f64 = 1e-8;

/// Best-match positions of a shapelet-transform forward pass.
#[derive(Debug, Clone)]
pub struct StransCache {
    /// `[B, k]` window start of each minimum.
    pub positions: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Shapelet transform of a batch `[B, C, L] -> [B, k]` using the pool's window.
pub fn strans_forward(input: &Tensor, pool: &ShapeletPool) -> Result<(Tensor, StransCache)> {
    let (b, c, l) = input.dims3()?;
    if pool.is_empty() {
        return Err(Error::Shape("shapelet transform needs a non-empty pool".into()));
    }
    if pool.required_channels() > c {
        return Err(Error::Shape(format!(
            "pool needs {} channels, input has {c}",
            pool.required_channels()
        )));
    }
    if let Some(s) = pool.shapelets().iter().find(|s| s.candidate.len() > l) {
        return Err(Error::Shape(format!(
            "shapelet of length {} is longer than the series ({l})",
            s.candidate.len()
        )));
    }
    let k = pool.len();
    let x = input.data();
    let mut counter = OpCounter::new();
    let mut out = Vec::with_capacity(b * k);
    let mut positions = Vec::with_capacity(b * k);
    for bi in 0..b {
        for s in pool.shapelets() {
            let cand = &s.candidate;
            let xr = &x[(bi * c + cand.channel) * l..][..l];
            let m = window_match(&cand.values, xr, cand.position, pool.window(), &mut counter);
            out.push(m.distance);
            positions.push(m.position);
        }
    }
    Ok((
        Tensor::new(&[b, k], out.clone())?,
        StransCache {
            positions,
            distances: out,
        },
    ))
}

/// Gradient of the transform with respect to its input. The minimizing
/// alignment is held fixed, so each feature pulls only on its own window.
pub fn strans_backward(
    input: &Tensor,
    pool: &ShapeletPool,
    cache: &StransCache,
    grad_out: &Tensor,
) -> Result<Tensor> {
    let (b, c, l) = input.dims3()?;
    let k = pool.len();
    if grad_out.shape() != [b, k] || cache.positions.len() != b * k {
        return Err(Error::Shape("shapelet-transform backward shapes do not match".into()));
    }
    let x = input.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    for bi in 0..b {
        for (si, s) in pool.shapelets().iter().enumerate() {
            let idx = bi * k + si;
            let d = cache.distances[idx];
            if d <= DISTANCE_EPS || g[idx] == 0.0 {
                continue;
            }
            let cand = &s.candidate;
            let base = (bi * c + cand.channel) * l + cache.positions[idx];
            let scale = g[idx] / d;
            for (i, sv) in cand.values.iter().enumerate() {
                gx[base + i] += scale * (x[base + i] - sv);
            }
        }
    }
    Tensor::new(&[b, c, l], gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimeSeries;
    use crate::shapelet::{shapelet_transform, Candidate, Shapelet};

    fn pool() -> ShapeletPool {
        let mk = |channel, position, values: Vec<f64>| Shapelet {
            candidate: Candidate {
                series_index: None,
                channel,
                position,
                values,
            },
            score: 1.0,
            threshold: 0.0,
        };
        ShapeletPool::new(vec![mk(0, 1, vec![1.0, 2.0]), mk(1, 3, vec![0.0, -1.0, 0.5])], 1)
    }

    #[test]
    fn matches_the_per_series_transform() {
        let vals: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x = Tensor::new(&[1, 2, 6], vals.clone()).unwrap();
        let (f, _) = strans_forward(&x, &pool()).unwrap();
        let ts = TimeSeries::new(vals, 2).unwrap();
        assert_eq!(f.data(), shapelet_transform(&ts, &pool(), 1).unwrap().as_slice());
    }

    #[test]
    fn exact_match_has_zero_gradient() {
        let x = Tensor::new(&[1, 2, 6], vec![0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.5]).unwrap();
        let (f, cache) = strans_forward(&x, &pool()).unwrap();
        assert_eq!(f.data()[0], 0.0);
        let g = strans_backward(&x, &pool(), &cache, &Tensor::new(&[1, 2], vec![1.0, 0.0]).unwrap()).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }
}
