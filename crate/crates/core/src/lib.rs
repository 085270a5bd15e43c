//! Negative-margin softmax losses and the two-stage few-shot pipeline.
//!
//! The crate trains a dense feature extractor on base classes under an
//! additive-margin softmax loss (the margin may be negative), then
//! evaluates the frozen features on disjoint novel classes with N-way
//! K-shot episodes. The [`analysis`] module measures how discriminative
//! the learned features are on both sides of that split.
//!
//! Numeric code is generic over [`numerics::Scalar`] (`f32`, `f64`); the
//! aliases below fix it to `f64`, which is what training and gradient
//! checking use.

pub mod analysis;
pub mod data;
pub mod error;
pub mod kv;
pub mod loss;
pub mod model;
pub mod numerics;
pub mod optim;
pub mod pipeline;

pub use error::{Error, Result};

pub type Matrix = numerics::Matrix<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type Network = model::Network<f64>;
pub type Network32 = model::Network<f32>;
pub type LossSpec = loss::LossSpec<f64>;
pub type OptimConfig = optim::OptimConfig<f64>;
pub type Adam = optim::Adam<f64>;

pub type AnalysisReport = analysis::AnalysisReport<f64>;
pub type ConfusionProfile = analysis::ConfusionProfile<f64>;
pub type PropositionInstance = analysis::PropositionInstance<f64>;
