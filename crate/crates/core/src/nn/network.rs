use rand::Rng;

use super::activation::Activation;
use super::conv::{ConvCache, ConvShape, ConvStage};
use super::layer::DenseLayer;
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feed-forward network: an optional convolution front end followed by a
/// chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    conv: Option<ConvStage<T>>,
    layers: Vec<DenseLayer<T>>,
}

/// Intermediate values kept from a forward pass for [`Network::backward`].
pub struct ForwardCache<T> {
    conv: Option<ConvCache<T>>,
    /// `activations[0]` feeds the first dense layer; `activations[i + 1]` is its output.
    activations: Vec<Matrix<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients in the same order as [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        self.tensors.iter().map(Vec::as_slice).collect()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn norm(&self) -> T {
        self.tensors
            .iter()
            .flatten()
            .map(|&g| g * g)
            .sum::<T>()
            .sqrt()
    }

    /// Elementwise `self + other`; both must come from the same network.
    pub fn add(&self, other: &Gradients<T>) -> Gradients<T> {
        Gradients {
            tensors: self
                .tensors
                .iter()
                .zip(&other.tensors)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y).collect())
                .collect(),
        }
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(conv: Option<ConvStage<T>>, layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a network needs at least one dense layer".into()));
        }
        let mut width = conv.as_ref().map(|c| c.shape.output_dim());
        for (i, layer) in layers.iter().enumerate() {
            if let Some(w) = width {
                if w != layer.inputs() {
                    return Err(Error::Shape(format!(
                        "layer {i} expects {} inputs but receives {w}",
                        layer.inputs()
                    )));
                }
            }
            width = Some(layer.outputs());
        }
        Ok(Self { conv, layers })
    }

    /// ReLU hidden layers and an identity output layer, Glorot initialized.
    pub fn mlp<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], output_dim: usize, rng: &mut R) -> Self {
        Self::with_front(None, input_dim, hidden, output_dim, rng)
    }

    /// Same as [`Network::mlp`] but behind a convolution stage.
    pub fn conv_mlp<R: Rng + ?Sized>(
        shape: ConvShape,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let conv = ConvStage::glorot(shape, rng)?;
        let input = shape.output_dim();
        Ok(Self::with_front(Some(conv), input, hidden, output_dim, rng))
    }

    fn with_front<R: Rng + ?Sized>(
        conv: Option<ConvStage<T>>,
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input_dim;
        for &h in hidden {
            layers.push(DenseLayer::glorot(width, h, Activation::Relu, rng));
            width = h;
        }
        layers.push(DenseLayer::glorot(width, output_dim, Activation::Identity, rng));
        Self { conv, layers }
    }

    pub fn input_dim(&self) -> usize {
        match &self.conv {
            Some(c) => c.shape.input_dim(),
            None => self.layers[0].inputs(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn conv(&self) -> Option<&ConvStage<T>> {
        self.conv.as_ref()
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.conv.as_ref().map_or(0, ConvStage::param_count)
            + self.layers.iter().map(DenseLayer::param_count).sum::<usize>()
    }

    /// Parameter tensors: conv weights and bias first (if any), then
    /// weights and bias of each dense layer.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        if let Some(c) = &self.conv {
            out.push(c.weights.as_slice());
            out.push(c.bias.as_slice());
        }
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        if let Some(c) = &mut self.conv {
            out.push(c.weights.as_mut_slice());
            out.push(c.bias.as_mut_slice());
        }
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    fn check_input(&self, batch: &Matrix<T>) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, batch has {} columns",
                self.input_dim(),
                batch.cols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(batch)?;
        let mut x = match &self.conv {
            Some(c) => c.forward(batch)?,
            None => self.layers[0].forward(batch)?,
        };
        let skip = usize::from(self.conv.is_none());
        for layer in &self.layers[skip..] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward_cached(&self, batch: &Matrix<T>) -> Result<ForwardCache<T>> {
        self.check_input(batch)?;
        let (conv, first) = match &self.conv {
            Some(c) => {
                let (out, cache) = c.forward_cached(batch)?;
                (Some(cache), out)
            }
            None => (None, batch.clone()),
        };
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(first);
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty"))?;
            activations.push(next);
        }
        Ok(ForwardCache { conv, activations })
    }

    /// Back-propagates `grad_output` (gradient of a scalar loss with respect
    /// to the network output) through the cached pass. The input gradient
    /// is only computed for pure dense networks and only when requested.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &Matrix<T>,
        want_input_grad: bool,
    ) -> Result<(Gradients<T>, Option<Matrix<T>>)> {
        let out = cache.output();
        if grad_output.rows() != out.rows() || grad_output.cols() != out.cols() {
            return Err(Error::Shape(format!(
                "output gradient is {}x{}, network output is {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                out.rows(),
                out.cols()
            )));
        }
        if want_input_grad && self.conv.is_some() {
            return Err(Error::Shape("input gradients are not available through the convolution stage".into()));
        }
        let n = self.layers.len();
        let mut dense_grads: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(n);
        let mut grad = grad_output.clone();
        let mut input_grad = None;
        for i in (0..n).rev() {
            let need_dx = i > 0 || self.conv.is_some() || want_input_grad;
            let (dw, db, dx) =
                self.layers[i].backward(&cache.activations[i], &cache.activations[i + 1], &grad, need_dx)?;
            dense_grads.push((dw.into_vec(), db));
            match dx {
                Some(dx) if i > 0 || self.conv.is_some() => grad = dx,
                other => input_grad = other,
            }
        }
        dense_grads.reverse();

        let mut tensors = Vec::with_capacity(2 * n + 2);
        if let (Some(conv), Some(conv_cache)) = (&self.conv, &cache.conv) {
            let (dw, db) = conv.backward(conv_cache, &grad)?;
            tensors.push(dw.into_vec());
            tensors.push(db);
        }
        for (dw, db) in dense_grads {
            tensors.push(dw);
            tensors.push(db);
        }
        Ok((Gradients { tensors }, input_grad))
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            tensors: self.param_shapes().into_iter().map(|n| vec![T::zero(); n]).collect(),
        }
    }
}
