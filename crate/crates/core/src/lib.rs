//! Concept bottleneck models with a sidecar target head that bypasses the
//! bottleneck when the concept predictor is unsure.
//!
//! The crate is split into a small neural-network core ([`nn`]), dataset
//! parsers and derived concept tasks ([`datasets`]), the models and their
//! prediction rules ([`cbm`]), training loops ([`training`]), metrics
//! ([`evaluation`]) and the experiment grid ([`experiment`]). Numeric code is
//! generic over [`Scalar`]; the aliases below fix it to `f32` or `f64`.

pub mod cbm;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod nn;
pub mod scalar;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix32 = nn::Matrix<f32>;
pub type Matrix64 = nn::Matrix<f64>;
pub type Network32 = nn::Network<f32>;
pub type Network64 = nn::Network<f64>;
pub type Clm32 = cbm::Clm<f32>;
pub type Clm64 = cbm::Clm<f64>;
pub type SidecarClm32 = cbm::SidecarClm<f32>;
pub type SidecarClm64 = cbm::SidecarClm<f64>;
pub type Tlm32 = cbm::Tlm<f32>;
pub type Tlm64 = cbm::Tlm<f64>;
pub type ConceptDataset32 = datasets::ConceptDataset<f32>;
pub type ConceptDataset64 = datasets::ConceptDataset<f64>;
