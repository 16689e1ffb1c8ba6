use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Gradients of a 1D convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Tensor,
    pub bias: Tensor,
}

fn check(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (b, c_in, l) = input.dims3()?;
    let (c_out, wc_in, k) = weight.dims3()?;
    if wc_in != c_in {
        return Err(Error::Shape(format!("conv weight expects {wc_in} input channels, got {c_in}")));
    }
    if bias.shape() != [c_out] {
        return Err(Error::Shape(format!("conv bias shape {:?}, expected [{c_out}]", bias.shape())));
    }
    if stride == 0 {
        return Err(Error::Shape("conv stride must be positive".into()));
    }
    if l + 2 * padding < k {
        return Err(Error::Shape(format!(
            "input length {l} with padding {padding} is shorter than kernel {k}"
        )));
    }
    let l_out = (l + 2 * padding - k) / stride + 1;
    Ok((b, c_in, l, c_out, k, l_out))
}

/// Output positions `t` whose tap `t*stride + tap - padding` lands inside `[0, l)`.
#[inline]
fn valid_range(tap: usize, stride: usize, padding: usize, l: usize, l_out: usize) -> (usize, usize) {
    // t*stride + tap >= padding  and  t*stride + tap - padding < l
    let lo = if tap >= padding { 0 } else { (padding - tap).div_ceil(stride) };
    let hi = if l + padding > tap {
        ((l + padding - tap - 1) / stride + 1).min(l_out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// Cross-correlation over the last axis: `[B, C_in, L] * [C_out, C_in, K] -> [B, C_out, L_out]`.
pub fn conv1d_forward(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let (b, c_in, l, c_out, k, l_out) = check(input, weight, bias, stride, padding)?;
    let x = input.data();
    let w = weight.data();
    let mut out = vec![0.0; b * c_out * l_out];
    for bi in 0..b {
        for co in 0..c_out {
            let row = &mut out[(bi * c_out + co) * l_out..][..l_out];
            row.fill(bias.data()[co]);
            for ci in 0..c_in {
                let xr = &x[(bi * c_in + ci) * l..][..l];
                for tap in 0..k {
                    let wv = w[(co * c_in + ci) * k + tap];
                    let (lo, hi) = valid_range(tap, stride, padding, l, l_out);
                    if stride == 1 {
                        let off = tap as isize - padding as isize;
                        let src = &xr[(lo as isize + off) as usize..(hi as isize + off) as usize];
                        row[lo..hi].iter_mut().zip(src).for_each(|(o, xv)| *o += wv * xv);
                    } else {
                        for t in lo..hi {
                            row[t] += wv * xr[t * stride + tap - padding];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[b, c_out, l_out], out)
}

/// Exact gradients of [`conv1d_forward`] given the upstream gradient.
pub fn conv1d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
    need_input: bool,
) -> Result<ConvGrads> {
    let c_out = weight.shape().first().copied().unwrap_or(0);
    let zero_bias = Tensor::zeros(&[c_out]);
    let (b, c_in, l, c_out, k, l_out) = check(input, weight, &zero_bias, stride, padding)?;
    if grad_out.shape() != [b, c_out, l_out] {
        return Err(Error::Shape(format!(
            "conv upstream gradient {:?}, expected [{b}, {c_out}, {l_out}]",
            grad_out.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; c_out];
    let mut gx = if need_input { vec![0.0; x.len()] } else { Vec::new() };

    for bi in 0..b {
        for co in 0..c_out {
            let grow = &g[(bi * c_out + co) * l_out..][..l_out];
            gb[co] += grow.iter().sum::<f64>();
            for ci in 0..c_in {
                let xoff = (bi * c_in + ci) * l;
                let xr = &x[xoff..xoff + l];
                for tap in 0..k {
                    let widx = (co * c_in + ci) * k + tap;
                    let (lo, hi) = valid_range(tap, stride, padding, l, l_out);
                    let mut acc = 0.0;
                    if stride == 1 {
                        let start = (lo + tap) - padding;
                        let src = &xr[start..start + (hi - lo)];
                        acc = grow[lo..hi].iter().zip(src).map(|(a, b)| a * b).sum();
                        if need_input {
                            let wv = w[widx];
                            let dst = &mut gx[xoff + start..xoff + start + (hi - lo)];
                            dst.iter_mut().zip(&grow[lo..hi]).for_each(|(d, gv)| *d += gv * wv);
                        }
                    } else {
                        for t in lo..hi {
                            let pos = t * stride + tap - padding;
                            acc += grow[t] * xr[pos];
                            if need_input {
                                gx[xoff + pos] += grow[t] * w[widx];
                            }
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }

    Ok(ConvGrads {
        input: if need_input { Some(Tensor::new(input.shape(), gx)?) } else { None },
        weight: Tensor::new(weight.shape(), gw)?,
        bias: Tensor::new(&[c_out], gb)?,
    })
}

/// Convolution layer with learnable weight `[C_out, C_in, K]` and bias `[C_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1d {
    /// Weights and bias uniform in `±1/sqrt(C_in·K)`.
    pub fn new(c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((c_in * kernel) as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[c_out, c_in, kernel], bound, rng),
            bias: Tensor::uniform(&[c_out], bound, rng),
            stride,
            padding,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv1d_forward(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, need_input: bool) -> Result<ConvGrads> {
        conv1d_backward(x, &self.weight, grad_out, self.stride, self.padding, need_input)
    }
}
