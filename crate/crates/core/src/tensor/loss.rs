use super::Tensor;
use crate::error::{Error, Result};

/// Classification targets for [`cross_entropy`].
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// One class index per row.
    Hard(&'a [usize]),
    /// Row-major `[B, V]` probability rows.
    Soft(&'a [f64]),
}

pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    row.iter().map(|z| z - lse).collect()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy over the batch and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Tensor, target: Target<'_>) -> Result<(f64, Tensor)> {
    let (b, v) = logits.dims2()?;
    if b == 0 {
        return Err(Error::Shape("cross-entropy over an empty batch".into()));
    }
    match target {
        Target::Hard(y) if y.len() != b || y.iter().any(|&c| c >= v) => {
            return Err(Error::Shape(format!("{} hard targets for {b} rows of {v} classes", y.len())))
        }
        Target::Soft(q) if q.len() != b * v => {
            return Err(Error::Shape(format!("{} soft-target values for [{b}, {v}]", q.len())))
        }
        _ => {}
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; b * v];
    for (i, row) in logits.data().chunks(v).enumerate() {
        let lp = log_softmax(row);
        let g = &mut grad[i * v..][..v];
        for k in 0..v {
            g[k] = lp[k].exp();
        }
        match target {
            Target::Hard(y) => {
                loss -= lp[y[i]];
                g[y[i]] -= 1.0;
            }
            Target::Soft(q) => {
                let q = &q[i * v..][..v];
                let mass: f64 = q.iter().sum();
                for k in 0..v {
                    loss -= q[k] * lp[k];
                    g[k] = g[k] * mass - q[k];
                }
            }
        }
    }
    let n = b as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, Tensor::new(&[b, v], grad)?))
}
