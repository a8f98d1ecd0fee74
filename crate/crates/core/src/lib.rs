//! Heterogeneous treatment-effect estimation under network interference.
//!
//! The crate generates synthetic interference datasets with known potential
//! outcomes ([`dgp`]), trains an adversarially balanced graph neural network
//! estimator and two baselines on them ([`model`]), tunes them from factual
//! validation loss only ([`tuning`]), and scores estimates over sampled
//! counterfactual networks ([`metrics`]). [`experiment`] wires these into
//! reproducible, file-backed pipelines.

pub mod autodiff;
pub mod dgp;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod tensor;
pub mod tuning;

pub use error::{Error, Result};
pub use tensor::Tensor;
