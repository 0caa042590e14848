//! Chronology inference for stratified radiocarbon data.
//!
//! The crate estimates the transition times between consecutive
//! archaeological strata from laboratory radiocarbon determinations, by
//! several routes that can be compared against each other:
//!
//! - order-constrained robust maximum likelihood with profile-likelihood
//!   surfaces ([`mle`]),
//! - a grid posterior over the boundary vector with highest-density credible
//!   regions, plus MCMC for ordered event sequences and empirical-Bayes
//!   deconvolution ([`bayes`]),
//! - nonparametric and parametric bootstrap clouds of the MLE with
//!   PCA-based confidence ellipsoids ([`bootstrap`]),
//! - calibration-curve tools: affine window fits with permutation
//!   diagnostics and a Wiener-prior Gaussian calibration posterior
//!   ([`calib`]),
//! - simulation studies reproducing the behaviour of these estimators on
//!   synthetic data ([`studies`]).
//!
//! Run `cargo run --example` for a tour; the `chronostrat` binary exposes
//! the ingestion/analysis pipeline on the command line.

pub mod bayes;
pub mod bootstrap;
pub mod calib;
pub mod cli;
pub mod error;
pub mod mle;
pub mod model;
pub mod report;
pub mod robust;
pub mod studies;

pub use error::{Error, Result};
