use super::Tensor;
use crate::error::{Error, Result};

/// Pointwise nonlinearities of the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// Slope 0.01 on the negative side.
    LeakyRelu,
    Sigmoid,
}

const LEAK: f64 = 0.01;

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "leaky_relu" | "leakyrelu" => Some(Activation::LeakyRelu),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAK * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative written in terms of the input `x` and output `y`.
    /// At the kink of the rectifiers the left derivative is used.
    #[inline]
    fn slope(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAK
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn forward(self, x: &Tensor) -> Tensor {
        let data = x.data().iter().map(|&v| self.apply(v)).collect();
        Tensor::new(x.shape(), data).expect("same shape")
    }

    /// Gradient through the activation given its input and output.
    pub fn backward(self, input: &Tensor, output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        if input.shape() != grad_out.shape() || output.shape() != grad_out.shape() {
            return Err(Error::Shape("activation backward shapes differ".into()));
        }
        let g = input
            .data()
            .iter()
            .zip(output.data())
            .zip(grad_out.data())
            .map(|((&x, &y), &g)| g * self.slope(x, y))
            .collect();
        Tensor::new(grad_out.shape(), g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let x = Tensor::new(&[4], vec![-2.0, 0.0, 0.5, 3.0]).unwrap();
        assert_eq!(Activation::Relu.forward(&x).data(), &[0.0, 0.0, 0.5, 3.0]);
        assert_eq!(Activation::LeakyRelu.forward(&x).data(), &[-0.02, 0.0, 0.5, 3.0]);
        assert_eq!(Activation::Sigmoid.forward(&x).data()[1], 0.5);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        let x = Tensor::new(&[1], vec![0.0]).unwrap();
        let y = Activation::Relu.forward(&x);
        let g = Activation::Relu.backward(&x, &y, &Tensor::filled(&[1], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0]);
    }

    #[test]
    fn names_round_trip() {
        for a in [Activation::Relu, Activation::LeakyRelu, Activation::Sigmoid] {
            assert_eq!(Activation::parse(a.name()), Some(a));
        }
    }
}
