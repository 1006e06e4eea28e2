use rand::Rng;

use super::activation::Activation;
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fully connected layer computing `act(x W + b)` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub(crate) weights: Matrix<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::Shape(format!(
                "bias has {} entries for a layer of width {}",
                bias.len(),
                weights.cols()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: vec![T::zero(); outputs],
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| T::lit(rng.random_range(-limit..limit)))
            .collect();
        Self {
            weights: Matrix::from_vec(inputs, outputs, data).expect("sized above"),
            bias: vec![T::zero(); outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!(
                "layer expects {} inputs, batch has {} columns",
                self.inputs(),
                x.cols()
            )));
        }
        let mut z = x.matmul(&self.weights)?;
        let act = self.activation;
        for row in 0..z.rows() {
            for (v, &b) in z.row_mut(row).iter_mut().zip(&self.bias) {
                *v = act.apply(*v + b);
            }
        }
        Ok(z)
    }

    /// Given the layer input, its output and the gradient at the output,
    /// returns `(dW, db, dX)`; `dX` only when requested.
    pub(crate) fn backward(
        &self,
        input: &Matrix<T>,
        output: &Matrix<T>,
        grad_output: &Matrix<T>,
        want_input_grad: bool,
    ) -> Result<(Matrix<T>, Vec<T>, Option<Matrix<T>>)> {
        let act = self.activation;
        let mut dz = grad_output.clone();
        if act != Activation::Identity {
            for (d, &y) in dz.as_mut_slice().iter_mut().zip(output.as_slice()) {
                *d *= act.derivative_from_output(y);
            }
        }
        let dw = input.t_matmul(&dz)?;
        let mut db = vec![T::zero(); self.outputs()];
        for row in dz.iter_rows() {
            for (acc, &d) in db.iter_mut().zip(row) {
                *acc += d;
            }
        }
        let dx = if want_input_grad {
            Some(dz.matmul_t(&self.weights)?)
        } else {
            None
        };
        Ok((dw, db, dx))
    }
}
