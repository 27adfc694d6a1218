//! Simulation of one-bit measurements of low-rank bisparse matrices and two
//! recovery schemes: projected back projection through an exact projection
//! onto the signal set, and a multistep hard-thresholding pipeline for
//! factorized Gaussian sensing.
//!
//! Signals are `n × n` matrices of rank at most `r` whose nonzero entries lie
//! in an `s × s` block. Sensing maps are Gaussian ensembles normalized so that
//! `E‖𝓐(Z)‖₁ = ‖Z‖_F`.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod operators;
pub mod recovery;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
pub use matrix::{frobenius_inner, frobenius_norm, generate_bilr, svd, BilrMatrix, DenseMatrix, SvdResult};
pub use recovery::{recover_multistep, recover_pbp, rescale_to_unit, PbpProjection, RecoveryOutput, Scheme};
pub use sensing::{
    make_dense_ensemble, make_factorized_ensemble, quantize, DenseEnsemble, FactorizedEnsemble, SensingMap,
    SignVector,
};
