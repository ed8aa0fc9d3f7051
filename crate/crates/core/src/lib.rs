//! Stochastic variational inference with local expectation gradients.
//!
//! The crate provides factorized variational distributions over mixed
//! continuous/discrete latent variables ([`variational`]), target log-densities
//! ([`targets`]), three gradient estimators behind one interface
//! ([`estimators`]), a stochastic ascent loop ([`optimizer`]), variance
//! diagnostics ([`diagnostics`]) and the sigmoid belief network experiment
//! with its recognition model ([`sbn`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod math;
pub mod optimizer;
pub mod quadrature;
pub mod sbn;
pub mod targets;
pub mod variational;

pub use error::{Error, Result};
pub use estimators::{BoundSplit, EstimatorConfig, EstimatorKind, GradientEstimate};
pub use quadrature::{gauss_hermite, QuadratureRule};
pub use targets::Target;
pub use variational::{Assignment, ModelBuilder, VariationalModel};
