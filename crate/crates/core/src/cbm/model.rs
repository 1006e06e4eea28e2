use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Source;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, ConvShape, Matrix, Network};
use crate::scalar::Scalar;

pub const TLM_HIDDEN: usize = 128;

/// Feature extractor placed in front of every concept or target head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    #[default]
    Mlp,
    SmallCnn,
}

impl Backbone {
    /// A freshly initialized network from `source` images to `outputs` logits.
    pub fn build<T: Scalar, R: Rng + ?Sized>(self, source: Source, outputs: usize, rng: &mut R) -> Result<Network<T>> {
        match self {
            Backbone::Mlp => {
                let hidden: &[usize] = match source {
                    Source::Mnist | Source::FashionMnist => &[256, 128],
                    Source::Cifar10 => &[512, 128],
                };
                Ok(Network::mlp(source.input_dim(), hidden, outputs, rng))
            }
            Backbone::SmallCnn => {
                let (channels, height, width) = source.image_shape();
                let shape = ConvShape {
                    channels,
                    height,
                    width,
                    filters: 8,
                    kernel: 5,
                };
                Network::conv_mlp(shape, &[128], outputs, rng)
            }
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backbone::Mlp => "mlp",
            Backbone::SmallCnn => "small_cnn",
        })
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Backbone::Mlp),
            "small_cnn" | "small-cnn" => Ok(Backbone::SmallCnn),
            other => Err(Error::Config(format!("unknown backbone '{other}' (mlp or small_cnn)"))),
        }
    }
}

fn expect_outputs<T: Scalar>(net: &Network<T>, want: usize, what: &str) -> Result<()> {
    if net.output_dim() != want {
        return Err(Error::Shape(format!(
            "{what} needs {want} outputs, network has {}",
            net.output_dim()
        )));
    }
    Ok(())
}

/// Concept labeling model: one sigmoid-read logit per concept.
#[derive(Debug, Clone, PartialEq)]
pub struct Clm<T> {
    net: Network<T>,
}

impl<T: Scalar> Clm<T> {
    pub fn new(net: Network<T>, n_concepts: usize) -> Result<Self> {
        expect_outputs(&net, n_concepts, "concept model")?;
        Ok(Self { net })
    }

    pub fn n_concepts(&self) -> usize {
        self.net.output_dim()
    }

    pub fn net(&self) -> &Network<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }

    pub fn into_net(self) -> Network<T> {
        self.net
    }
}

/// Concept model whose outputs are `[concept logits | target logits]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarClm<T> {
    net: Network<T>,
    n_concepts: usize,
}

impl<T: Scalar> SidecarClm<T> {
    pub fn new(net: Network<T>, n_concepts: usize, n_targets: usize) -> Result<Self> {
        expect_outputs(&net, n_concepts + n_targets, "sidecar concept model")?;
        if n_targets == 0 {
            return Err(Error::Shape("sidecar target head needs at least one output".into()));
        }
        Ok(Self { net, n_concepts })
    }

    pub fn n_concepts(&self) -> usize {
        self.n_concepts
    }

    pub fn n_targets(&self) -> usize {
        self.net.output_dim() - self.n_concepts
    }

    pub fn net(&self) -> &Network<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }
}

/// Target model from concept vectors to target logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Tlm<T> {
    net: Network<T>,
}

impl<T: Scalar> Tlm<T> {
    pub fn new(net: Network<T>, n_concepts: usize, n_targets: usize) -> Result<Self> {
        if net.conv().is_some() || net.input_dim() != n_concepts {
            return Err(Error::Shape(format!(
                "target model must be dense with {n_concepts} inputs"
            )));
        }
        expect_outputs(&net, n_targets, "target model")?;
        Ok(Self { net })
    }

    /// `C -> 128 ReLU -> M`, Glorot initialized.
    pub fn random<R: Rng + ?Sized>(n_concepts: usize, n_targets: usize, rng: &mut R) -> Self {
        Self {
            net: Network::mlp(n_concepts, &[TLM_HIDDEN], n_targets, rng),
        }
    }

    pub fn n_concepts(&self) -> usize {
        self.net.input_dim()
    }

    pub fn n_targets(&self) -> usize {
        self.net.output_dim()
    }

    pub fn net(&self) -> &Network<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }
}

/// Concept probabilities for each row of `batch`.
pub fn clm_predict<T: Scalar>(model: &Clm<T>, batch: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(model.net.forward(batch)?.map(sigmoid))
}

/// Sigmoid-read concept block and raw target logits of one sidecar row.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarOutput<T> {
    pub concept_probs: Vec<T>,
    pub target_logits: Vec<T>,
}

pub fn sidecar_predict<T: Scalar>(model: &SidecarClm<T>, batch: &Matrix<T>) -> Result<Vec<SidecarOutput<T>>> {
    let out = model.net.forward(batch)?;
    let c = model.n_concepts;
    Ok(out
        .iter_rows()
        .map(|row| SidecarOutput {
            concept_probs: row[..c].iter().map(|&z| sigmoid(z)).collect(),
            target_logits: row[c..].to_vec(),
        })
        .collect())
}
