use super::Tensor;
use crate::error::{Error, Result};

/// How a batch-norm layer picks its normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Batch statistics; the caller folds them into the running estimates.
    Train,
    /// Running statistics.
    Eval,
    /// Batch statistics with the running estimates left untouched
    /// (frozen-model inversion).
    BatchStats,
}

/// Learnable affine parameters and running statistics of one BN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnState {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BnState {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// Everything the backward pass needs, plus the per-channel batch moments.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub mode: BnMode,
    /// Per-channel mean over (batch, time).
    pub batch_mean: Vec<f64>,
    /// Per-channel biased variance over (batch, time).
    pub batch_var: Vec<f64>,
    inv_std: Vec<f64>,
    x_hat: Vec<f64>,
    count: usize,
    shape: (usize, usize, usize),
}

#[derive(Debug, Clone)]
pub struct BnGrads {
    pub input: Tensor,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

fn moments(x: &[f64], b: usize, c: usize, l: usize) -> (Vec<f64>, Vec<f64>) {
    let m = (b * l) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for bi in 0..b {
            s += x[(bi * c + ch) * l..][..l].iter().sum::<f64>();
        }
        let mu = s / m;
        let mut v = 0.0;
        for bi in 0..b {
            v += x[(bi * c + ch) * l..][..l].iter().map(|z| (z - mu) * (z - mu)).sum::<f64>();
        }
        mean[ch] = mu;
        var[ch] = v / m;
    }
    (mean, var)
}

/// Batch normalization over the (batch, time) axes of `[B, C, L]`.
pub fn batchnorm_forward(input: &Tensor, state: &BnState, mode: BnMode) -> Result<(Tensor, BnCache)> {
    let (b, c, l) = input.dims3()?;
    if c != state.channels() {
        return Err(Error::Shape(format!("batch norm over {} channels got {c}", state.channels())));
    }
    let count = b * l;
    if mode != BnMode::Eval && count < 2 {
        return Err(Error::Degenerate(format!(
            "batch statistics need at least two values per channel, got {count}"
        )));
    }
    let x = input.data();
    let (batch_mean, batch_var) = moments(x, b, c, l);
    let (mean, var) = match mode {
        BnMode::Eval => (&state.running_mean, &state.running_var),
        _ => (&batch_mean, &batch_var),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
    let mut x_hat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    let (gamma, beta) = (state.gamma.data(), state.beta.data());
    for bi in 0..b {
        for ch in 0..c {
            let off = (bi * c + ch) * l;
            for t in off..off + l {
                let h = (x[t] - mean[ch]) * inv_std[ch];
                x_hat[t] = h;
                out[t] = gamma[ch] * h + beta[ch];
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), out)?,
        BnCache {
            mode,
            batch_mean,
            batch_var,
            inv_std,
            x_hat,
            count,
            shape: (b, c, l),
        },
    ))
}

/// Exact gradients of [`batchnorm_forward`].
///
/// `stat_grads`, when given, are upstream gradients with respect to the batch
/// mean and biased batch variance reported in the cache; they are propagated
/// to the input whatever the mode.
pub fn batchnorm_backward(
    cache: &BnCache,
    state: &BnState,
    input: &Tensor,
    grad_out: &Tensor,
    stat_grads: Option<(&[f64], &[f64])>,
) -> Result<BnGrads> {
    let (b, c, l) = cache.shape;
    if grad_out.shape() != [b, c, l] || input.shape() != [b, c, l] {
        return Err(Error::Shape("batch-norm backward shapes do not match the cache".into()));
    }
    let g = grad_out.data();
    let x = input.data();
    let gamma = state.gamma.data();
    let m = cache.count as f64;
    let mut d_gamma = vec![0.0; c];
    let mut d_beta = vec![0.0; c];
    let mut gx = vec![0.0; g.len()];

    for ch in 0..c {
        let mut sum_g = 0.0;
        let mut sum_gh = 0.0;
        for bi in 0..b {
            let off = (bi * c + ch) * l;
            for t in off..off + l {
                sum_g += g[t];
                sum_gh += g[t] * cache.x_hat[t];
            }
        }
        d_beta[ch] = sum_g;
        d_gamma[ch] = sum_gh;
        let s = cache.inv_std[ch];
        let gm = gamma[ch];
        for bi in 0..b {
            let off = (bi * c + ch) * l;
            for t in off..off + l {
                gx[t] = match cache.mode {
                    BnMode::Eval => gm * s * g[t],
                    _ => gm * s / m * (m * g[t] - sum_g - cache.x_hat[t] * sum_gh),
                };
            }
        }
        if let Some((d_mean, d_var)) = stat_grads {
            let mu = cache.batch_mean[ch];
            for bi in 0..b {
                let off = (bi * c + ch) * l;
                for t in off..off + l {
                    gx[t] += d_mean[ch] / m + d_var[ch] * 2.0 * (x[t] - mu) / m;
                }
            }
        }
    }
    Ok(BnGrads {
        input: Tensor::new(&[b, c, l], gx)?,
        gamma: d_gamma,
        beta: d_beta,
    })
}

/// A batch-norm layer; thin owner of a [`BnState`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub state: BnState,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            state: BnState::new(channels),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: BnMode) -> Result<(Tensor, BnCache)> {
        batchnorm_forward(x, &self.state, mode)
    }

    /// Folds the batch moments of a training step into the running estimates
    /// (variance unbiased, as in the usual convention).
    pub fn update_running(&mut self, cache: &BnCache) {
        let n = cache.count as f64;
        let mom = self.state.momentum;
        for ch in 0..self.state.channels() {
            let unbiased = cache.batch_var[ch] * n / (n - 1.0);
            self.state.running_mean[ch] = (1.0 - mom) * self.state.running_mean[ch] + mom * cache.batch_mean[ch];
            self.state.running_var[ch] = (1.0 - mom) * self.state.running_var[ch] + mom * unbiased;
        }
    }
}

/// Per-sample normalization over groups of channels (and time). One group per
/// channel is instance norm; a single group is layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupNorm {
    pub groups: usize,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct GroupNormCache {
    inv_std: Vec<f64>,
    x_hat: Vec<f64>,
    shape: (usize, usize, usize),
}

impl GroupNorm {
    pub fn new(channels: usize, groups: usize) -> Self {
        Self {
            groups,
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            eps: 1e-5,
        }
    }
}

pub fn groupnorm_forward(input: &Tensor, norm: &GroupNorm) -> Result<(Tensor, GroupNormCache)> {
    let (b, c, l) = input.dims3()?;
    if norm.groups == 0 || c % norm.groups != 0 || norm.gamma.numel() != c {
        return Err(Error::Shape(format!(
            "group norm with {} groups cannot normalize {c} channels",
            norm.groups
        )));
    }
    let per = c / norm.groups * l;
    let x = input.data();
    let mut inv_std = vec![0.0; b * norm.groups];
    let mut x_hat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for bi in 0..b {
        for gi in 0..norm.groups {
            let off = bi * c * l + gi * per;
            let seg = &x[off..off + per];
            let mu = seg.iter().sum::<f64>() / per as f64;
            let var = seg.iter().map(|z| (z - mu) * (z - mu)).sum::<f64>() / per as f64;
            let s = 1.0 / (var + norm.eps).sqrt();
            inv_std[bi * norm.groups + gi] = s;
            for (i, z) in seg.iter().enumerate() {
                let ch = (gi * per + i) / l;
                let h = (z - mu) * s;
                x_hat[off + i] = h;
                out[off + i] = norm.gamma.data()[ch] * h + norm.beta.data()[ch];
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), out)?,
        GroupNormCache {
            inv_std,
            x_hat,
            shape: (b, c, l),
        },
    ))
}

/// Returns `(d_input, d_gamma, d_beta)`.
pub fn groupnorm_backward(
    cache: &GroupNormCache,
    norm: &GroupNorm,
    grad_out: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let (b, c, l) = cache.shape;
    if grad_out.shape() != [b, c, l] {
        return Err(Error::Shape("group-norm backward shape does not match the cache".into()));
    }
    let g = grad_out.data();
    let per = c / norm.groups * l;
    let m = per as f64;
    let mut gx = vec![0.0; g.len()];
    let mut d_gamma = vec![0.0; c];
    let mut d_beta = vec![0.0; c];
    for bi in 0..b {
        for gi in 0..norm.groups {
            let off = bi * c * l + gi * per;
            let mut sum_dh = 0.0;
            let mut sum_dhh = 0.0;
            for i in 0..per {
                let ch = (gi * per + i) / l;
                let dh = g[off + i] * norm.gamma.data()[ch];
                sum_dh += dh;
                sum_dhh += dh * cache.x_hat[off + i];
                d_gamma[ch] += g[off + i] * cache.x_hat[off + i];
                d_beta[ch] += g[off + i];
            }
            let s = cache.inv_std[bi * norm.groups + gi];
            for i in 0..per {
                let ch = (gi * per + i) / l;
                let dh = g[off + i] * norm.gamma.data()[ch];
                gx[off + i] = s / m * (m * dh - sum_dh - cache.x_hat[off + i] * sum_dhh);
            }
        }
    }
    Ok((Tensor::new(&[b, c, l], gx)?, d_gamma, d_beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_input_is_a_fixed_point() {
        // Per channel: mean 0, biased variance 1.
        let x = Tensor::new(&[2, 1, 2], vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let (y, cache) = batchnorm_forward(&x, &BnState::new(1), BnMode::Train).unwrap();
        assert_eq!(cache.batch_mean, vec![0.0]);
        assert_eq!(cache.batch_var, vec![1.0]);
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn eval_with_identity_stats_is_affine() {
        let mut state = BnState::new(2);
        state.eps = 1e-12;
        state.gamma = Tensor::new(&[2], vec![2.0, -1.0]).unwrap();
        state.beta = Tensor::new(&[2], vec![0.5, 0.0]).unwrap();
        let x = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = batchnorm_forward(&x, &state, BnMode::Eval).unwrap();
        let expected = [2.5, 4.5, -3.0, -4.0];
        for (a, b) in y.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn train_mode_output_is_standardized() {
        let x: Vec<f64> = (0..48).map(|i| ((i * 37) % 11) as f64 * 0.7 - 2.0).collect();
        let x = Tensor::new(&[4, 3, 4], x).unwrap();
        let (y, _) = batchnorm_forward(&x, &BnState::new(3), BnMode::Train).unwrap();
        let (mean, var) = moments(y.data(), 4, 3, 4);
        for ch in 0..3 {
            assert!(mean[ch].abs() < 1e-5);
            assert!((var[ch] - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm1d::new(1);
        let x = Tensor::new(&[1, 1, 2], vec![1.0, 3.0]).unwrap();
        let (_, cache) = bn.forward(&x, BnMode::Train).unwrap();
        bn.update_running(&cache);
        assert!((bn.state.running_mean[0] - 0.2).abs() < 1e-12);
        // unbiased variance of {1, 3} is 2
        assert!((bn.state.running_var[0] - (0.9 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn tiny_batch_is_degenerate() {
        let x = Tensor::zeros(&[1, 1, 1]);
        assert!(matches!(
            batchnorm_forward(&x, &BnState::new(1), BnMode::Train),
            Err(Error::Degenerate(_))
        ));
        assert!(batchnorm_forward(&x, &BnState::new(1), BnMode::Eval).is_ok());
    }
}
