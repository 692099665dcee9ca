//! Community detection for networks with an outcome-irrelevant background
//! group, where nodal covariates predict background membership through a
//! logistic model.
//!
//! The crate provides three pseudo-likelihood EM fitters ([`em`]), the
//! matching generative model ([`synth`]), joint-likelihood model selection
//! ([`select`]), partition metrics ([`metrics`]) and the file formats and
//! simulation harness behind the `lrcd` binary ([`io`], [`sim`]).

pub mod em;
pub mod error;
pub mod io;
pub mod logistic;
pub mod metrics;
pub mod network;
pub mod select;
pub mod sim;
pub mod spectral;
pub mod synth;

pub use em::{fit, FitOptions, FitResult, ModelParams, Posterior, Variant};
pub use error::{Error, Result};
pub use network::{
    block_counts, edge_block_sums, BlockCounts, CovariateMatrix, LabelVector, Network,
};
