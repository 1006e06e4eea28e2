use rand::Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shape of a [`ConvStage`]: square kernel, stride 1, no padding, followed by
/// ReLU and non-overlapping 2x2 max pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn input_dim(&self) -> usize {
        self.channels * self.height * self.width
    }

    fn conv_hw(&self) -> (usize, usize) {
        (self.height + 1 - self.kernel, self.width + 1 - self.kernel)
    }

    fn pooled_hw(&self) -> (usize, usize) {
        let (h, w) = self.conv_hw();
        (h / 2, w / 2)
    }

    pub fn output_dim(&self) -> usize {
        let (h, w) = self.pooled_hw();
        h * w * self.filters
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn validate(&self) -> Result<()> {
        if self.kernel == 0
            || self.filters == 0
            || self.channels == 0
            || self.kernel > self.height
            || self.kernel > self.width
            || self.height + 1 - self.kernel < 2
            || self.width + 1 - self.kernel < 2
        {
            return Err(Error::Shape(format!("unusable convolution shape {self:?}")));
        }
        Ok(())
    }
}

/// Single convolution + ReLU + 2x2 max-pool front end. Input rows are laid
/// out channel-major (`c * H * W + y * W + x`); output rows are
/// `(pooled_y * pooled_w + pooled_x) * filters + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStage<T> {
    pub(crate) shape: ConvShape,
    /// `patch_len x filters`
    pub(crate) weights: Matrix<T>,
    pub(crate) bias: Vec<T>,
}

pub(crate) struct ConvCache<T> {
    patches: Matrix<T>,
    activated: Matrix<T>,
    argmax: Vec<u32>,
}

impl<T: Scalar> ConvStage<T> {
    pub fn new(shape: ConvShape, weights: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if weights.rows() != shape.patch_len() || weights.cols() != shape.filters || bias.len() != shape.filters {
            return Err(Error::Shape(format!(
                "convolution parameters do not match {shape:?}"
            )));
        }
        Ok(Self {
            shape,
            weights,
            bias,
        })
    }

    pub fn glorot<R: Rng + ?Sized>(shape: ConvShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let k2 = shape.kernel * shape.kernel;
        let limit = (6.0 / ((shape.channels + shape.filters) * k2) as f64).sqrt();
        let data = (0..shape.patch_len() * shape.filters)
            .map(|_| T::lit(rng.random_range(-limit..limit)))
            .collect();
        Ok(Self {
            shape,
            weights: Matrix::from_vec(shape.patch_len(), shape.filters, data)?,
            bias: vec![T::zero(); shape.filters],
        })
    }

    pub fn shape(&self) -> ConvShape {
        self.shape
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    fn im2col(&self, x: &Matrix<T>) -> Matrix<T> {
        let s = self.shape;
        let (oh, ow) = s.conv_hw();
        let positions = oh * ow;
        let k = s.kernel;
        let mut patches = Matrix::zeros(x.rows() * positions, s.patch_len());
        for b in 0..x.rows() {
            let img = x.row(b);
            for oy in 0..oh {
                for ox in 0..ow {
                    let dst = patches.row_mut(b * positions + oy * ow + ox);
                    let mut col = 0;
                    for c in 0..s.channels {
                        let plane = &img[c * s.height * s.width..];
                        for ky in 0..k {
                            let src = &plane[(oy + ky) * s.width + ox..][..k];
                            dst[col..col + k].copy_from_slice(src);
                            col += k;
                        }
                    }
                }
            }
        }
        patches
    }

    pub(crate) fn forward_cached(&self, x: &Matrix<T>) -> Result<(Matrix<T>, ConvCache<T>)> {
        let s = self.shape;
        if x.cols() != s.input_dim() {
            return Err(Error::Shape(format!(
                "convolution expects {} inputs, batch has {} columns",
                s.input_dim(),
                x.cols()
            )));
        }
        let (oh, ow) = s.conv_hw();
        let (ph, pw) = s.pooled_hw();
        let positions = oh * ow;
        let f = s.filters;

        let patches = self.im2col(x);
        let mut activated = patches.matmul(&self.weights)?;
        for r in 0..activated.rows() {
            for (v, &b) in activated.row_mut(r).iter_mut().zip(&self.bias) {
                *v = super::activation::relu(*v + b);
            }
        }

        let mut out = Matrix::zeros(x.rows(), s.output_dim());
        let mut argmax = vec![0u32; x.rows() * s.output_dim()];
        for b in 0..x.rows() {
            for py in 0..ph {
                for px in 0..pw {
                    for fi in 0..f {
                        let mut best_row = b * positions + (2 * py) * ow + 2 * px;
                        let mut best = activated[(best_row, fi)];
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let r = b * positions + (2 * py + dy) * ow + 2 * px + dx;
                            if activated[(r, fi)] > best {
                                best = activated[(r, fi)];
                                best_row = r;
                            }
                        }
                        let o = (py * pw + px) * f + fi;
                        out[(b, o)] = best;
                        argmax[b * s.output_dim() + o] = best_row as u32;
                    }
                }
            }
        }
        Ok((
            out,
            ConvCache {
                patches,
                activated,
                argmax,
            },
        ))
    }

    /// Parameter gradients `(dW, db)`. The input gradient is never needed
    /// because the stage always sits directly on the raw pixels.
    pub(crate) fn backward(&self, cache: &ConvCache<T>, grad_output: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
        let s = self.shape;
        let f = s.filters;
        let mut dz = Matrix::zeros(cache.activated.rows(), f);
        for b in 0..grad_output.rows() {
            for (o, &g) in grad_output.row(b).iter().enumerate() {
                let r = cache.argmax[b * s.output_dim() + o] as usize;
                dz[(r, o % f)] += g;
            }
        }
        for (d, &a) in dz.as_mut_slice().iter_mut().zip(cache.activated.as_slice()) {
            if a <= T::zero() {
                *d = T::zero();
            }
        }
        let dw = cache.patches.t_matmul(&dz)?;
        let mut db = vec![T::zero(); f];
        for row in dz.iter_rows() {
            for (acc, &d) in db.iter_mut().zip(row) {
                *acc += d;
            }
        }
        Ok((dw, db))
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward_cached(x)?.0)
    }
}
