use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// `[B, in] x [out, in]^T + bias -> [B, out]`.
pub fn linear_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (b, n_in) = input.dims2()?;
    let (n_out, w_in) = weight.dims2()?;
    if w_in != n_in || bias.shape() != [n_out] {
        return Err(Error::Shape(format!(
            "linear layer [{n_out}, {w_in}] cannot take input {:?}",
            input.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let mut out = vec![0.0; b * n_out];
    for bi in 0..b {
        let xr = &x[bi * n_in..][..n_in];
        for o in 0..n_out {
            let wr = &w[o * n_in..][..n_in];
            out[bi * n_out + o] = bias.data()[o] + xr.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Tensor::new(&[b, n_out], out)
}

pub fn linear_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<LinearGrads> {
    let (b, n_in) = input.dims2()?;
    let (n_out, _) = weight.dims2()?;
    if grad_out.shape() != [b, n_out] {
        return Err(Error::Shape(format!(
            "linear upstream gradient {:?}, expected [{b}, {n_out}]",
            grad_out.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; b * n_in];
    let mut gw = vec![0.0; n_out * n_in];
    let mut gb = vec![0.0; n_out];
    for bi in 0..b {
        let xr = &x[bi * n_in..][..n_in];
        for o in 0..n_out {
            let go = g[bi * n_out + o];
            if go == 0.0 {
                continue;
            }
            gb[o] += go;
            let wr = &w[o * n_in..][..n_in];
            let gwr = &mut gw[o * n_in..][..n_in];
            let gxr = &mut gx[bi * n_in..][..n_in];
            for i in 0..n_in {
                gwr[i] += go * xr[i];
                gxr[i] += go * wr[i];
            }
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(&[b, n_in], gx)?,
        weight: Tensor::new(&[n_out, n_in], gw)?,
        bias: Tensor::new(&[n_out], gb)?,
    })
}

/// Fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Weights and bias from U(-1/sqrt(in), 1/sqrt(in)).
    pub fn new(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (n_in.max(1) as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[n_out, n_in], bound, rng),
            bias: Tensor::uniform(&[n_out], bound, rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        linear_forward(x, &self.weight, &self.bias)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<LinearGrads> {
        linear_backward(x, &self.weight, grad_out)
    }
}

/// Row-wise concatenation `[B, a] ++ [B, b] -> [B, a + b]`.
pub fn concat_features(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, da) = a.dims2()?;
    let (nb, db) = b.dims2()?;
    if n != nb {
        return Err(Error::Shape(format!("cannot concatenate batches of {n} and {nb}")));
    }
    let mut out = Vec::with_capacity(n * (da + db));
    for i in 0..n {
        out.extend_from_slice(&a.data()[i * da..][..da]);
        out.extend_from_slice(&b.data()[i * db..][..db]);
    }
    Tensor::new(&[n, da + db], out)
}

/// Inverse of [`concat_features`]: splits columns at `at`.
pub fn split_features(x: &Tensor, at: usize) -> Result<(Tensor, Tensor)> {
    let (n, d) = x.dims2()?;
    if at > d {
        return Err(Error::Shape(format!("cannot split {d} columns at {at}")));
    }
    let mut a = Vec::with_capacity(n * at);
    let mut b = Vec::with_capacity(n * (d - at));
    for row in x.data().chunks(d.max(1)).take(n) {
        a.extend_from_slice(&row[..at]);
        b.extend_from_slice(&row[at..]);
    }
    Ok((Tensor::new(&[n, at], a)?, Tensor::new(&[n, d - at], b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_product() {
        let x = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(&[2, 2], vec![1.0, 0.0, 3.0, -1.0]).unwrap();
        let b = Tensor::new(&[2], vec![0.5, 0.0]).unwrap();
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[1.5, 1.0]);
    }

    #[test]
    fn concat_then_split_is_identity() {
        let a = Tensor::new(&[2, 1], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = concat_features(&a, &b).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let (a2, b2) = split_features(&c, 1).unwrap();
        assert_eq!((a2, b2), (a, b));
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::zeros(&[1, 3]);
        let w = Tensor::zeros(&[2, 2]);
        assert!(linear_forward(&x, &w, &Tensor::zeros(&[2])).is_err());
    }
}
