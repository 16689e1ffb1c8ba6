//! A small dense-tensor engine with hand-written reverse-mode rules for the
//! layers of the 1D CNN backbone.
//!
//! Every layer exposes a `forward` that returns its output together with the
//! cache its `backward` needs. Backward rules take the upstream gradient and
//! return gradients for the layer input and parameters; the network module
//! chains them in reverse order.

mod activation;
mod conv;
mod linear;
mod loss;
mod norm;
mod optim;
mod pool;
mod strans;

pub use activation::Activation;
pub use conv::{conv1d_backward, conv1d_forward, Conv1d, ConvGrads};
pub use linear::{concat_features, linear_backward, linear_forward, split_features, Linear, LinearGrads};
pub use loss::{cross_entropy, log_softmax, softmax, Target};
pub use norm::{
    batchnorm_backward, batchnorm_forward, groupnorm_backward, groupnorm_forward, BatchNorm1d,
    BnCache, BnGrads, BnMode, BnState, GroupNorm, GroupNormCache,
};
pub use optim::Adam;
pub use pool::{
    avgpool1d_backward, avgpool1d_forward, global_max_backward, global_max_forward,
    maxpool1d_backward, maxpool1d_forward, pooled_len,
};
pub use strans::{strans_backward, strans_forward, StransCache, DISTANCE_EPS};

use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense array of `f64` with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
            grad: None,
        }
    }

    /// Uniform in `[-bound, bound)`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "gradient of {} values for a tensor of {}",
                g.len(),
                self.data.len()
            )));
        }
        let buf = self.grad.get_or_insert_with(|| vec![0.0; g.len()]);
        buf.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Values and gradient (zeros if absent) borrowed together.
    pub fn data_and_grad(&mut self) -> (&mut [f64], &[f64]) {
        let n = self.data.len();
        let grad = self.grad.get_or_insert_with(|| vec![0.0; n]);
        (&mut self.data, grad)
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Shape(format!("expected a 2-d tensor, got {:?}", self.shape))),
        }
    }

    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(Error::Shape(format!("expected a 3-d tensor, got {:?}", self.shape))),
        }
    }
}
