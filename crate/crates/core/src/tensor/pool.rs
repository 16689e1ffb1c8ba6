use super::Tensor;
use crate::error::{Error, Result};

/// Output length of a pooling window over `l` steps. A window longer than the
/// input is clipped, so any non-empty input pools to at least one step.
pub fn pooled_len(l: usize, kernel: usize, stride: usize) -> usize {
    if l == 0 {
        0
    } else if l < kernel {
        1
    } else {
        (l - kernel) / stride + 1
    }
}

fn check(input: &Tensor, kernel: usize, stride: usize) -> Result<(usize, usize, usize, usize)> {
    let (b, c, l) = input.dims3()?;
    if kernel == 0 || stride == 0 || l == 0 {
        return Err(Error::Shape(format!("pooling kernel {kernel} stride {stride} over length {l}")));
    }
    Ok((b, c, l, pooled_len(l, kernel, stride)))
}

/// Max pooling; returns the output and the flat input index of every maximum
/// (ties go to the earliest step).
pub fn maxpool1d_forward(input: &Tensor, kernel: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (b, c, l, l_out) = check(input, kernel, stride)?;
    let x = input.data();
    let mut out = vec![0.0; b * c * l_out];
    let mut arg = vec![0; b * c * l_out];
    for row in 0..b * c {
        for t in 0..l_out {
            let start = row * l + t * stride;
            let end = row * l + (t * stride + kernel).min(l);
            let mut best = start;
            for i in start + 1..end {
                if x[i] > x[best] {
                    best = i;
                }
            }
            out[row * l_out + t] = x[best];
            arg[row * l_out + t] = best;
        }
    }
    Ok((Tensor::new(&[b, c, l_out], out)?, arg))
}

pub fn maxpool1d_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    if argmax.len() != grad_out.numel() {
        return Err(Error::Shape("max-pool backward gradient does not match its cache".into()));
    }
    let mut gx = Tensor::zeros(input_shape);
    let d = gx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(gx)
}

pub fn avgpool1d_forward(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    let (b, c, l, l_out) = check(input, kernel, stride)?;
    let x = input.data();
    let mut out = vec![0.0; b * c * l_out];
    for row in 0..b * c {
        for t in 0..l_out {
            let start = t * stride;
            let end = (start + kernel).min(l);
            let w = &x[row * l + start..row * l + end];
            out[row * l_out + t] = w.iter().sum::<f64>() / w.len() as f64;
        }
    }
    Tensor::new(&[b, c, l_out], out)
}

pub fn avgpool1d_backward(input_shape: &[usize], kernel: usize, stride: usize, grad_out: &Tensor) -> Result<Tensor> {
    let mut gx = Tensor::zeros(input_shape);
    let (b, c, l, l_out) = check(&gx, kernel, stride)?;
    if grad_out.shape() != [b, c, l_out] {
        return Err(Error::Shape("avg-pool backward gradient has the wrong shape".into()));
    }
    let g = grad_out.data();
    let d = gx.data_mut();
    for row in 0..b * c {
        for t in 0..l_out {
            let start = t * stride;
            let end = (start + kernel).min(l);
            let share = g[row * l_out + t] / (end - start) as f64;
            d[row * l + start..row * l + end].iter_mut().for_each(|v| *v += share);
        }
    }
    Ok(gx)
}

/// Maximum over the time axis: `[B, C, L] -> [B, C]`.
pub fn global_max_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (b, c, l) = input.dims3()?;
    let (out, arg) = maxpool1d_forward(input, l, l)?;
    Ok((Tensor::new(&[b, c], out.into_data())?, arg))
}

pub fn global_max_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    maxpool1d_backward(input_shape, argmax, grad_out)
}
