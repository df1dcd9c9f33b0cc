//! QSVMF: wrapper feature selection that evolves quantum feature-map circuits
//! with NSGA-II and scores them with a fidelity-kernel SVM.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: WDBC loading, min-max scaling, stratified folds, covariance score.
//! - [`encoding`]: chromosome layout, decoding into [`encoding::CircuitSpec`], gate counts.
//! - [`qsim`]: statevector simulation of feature maps and the fidelity kernel.
//! - [`svm`]: SMO dual solver over precomputed kernels, classical kernels.
//! - [`moga`]: NSGA-II sorting, crowding, variation and the generational loop.
//! - [`baselines`]: chi2 / f-regression scoring and classical classifiers.
//! - [`pipeline`]: fitness wiring, per-fold runs, aggregation and comparisons.

pub mod baselines;
pub mod data;
pub mod encoding;
pub mod error;
pub mod moga;
pub mod pipeline;
pub mod qsim;
pub mod svm;

mod hash;

pub use error::{Error, Result};
pub use hash::{fnv1a, mix_seed};
