//! Diagonal state-space sequence models viewed as exactly solvable
//! oscillator networks.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the bottom of this file fix the scalar to `f64`, which is what the CLI and
//! the pipeline use.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod carleman;
pub mod circulant;
pub mod data;
pub mod error;
pub mod linalg;
pub mod margin;
pub mod modal;
pub mod model;
pub mod optim;
pub mod oscillator;
pub mod report;
pub mod scalar;
pub mod ssm;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

pub type DftBasis64 = circulant::DftBasis<f64>;
pub type DiagonalSpectrum64 = ssm::DiagonalSpectrum<f64>;
pub type Discretization64 = ssm::Discretization<f64>;
pub type ModalSeries64 = modal::ModalSeries<f64>;
pub type CarlemanCoefficients64 = carleman::CarlemanCoefficients<f64>;
pub type Model64 = model::Model<f64>;



pub type DftBasis32 = circulant::DftBasis<f32>;
pub type DiagonalSpectrum32 = ssm::DiagonalSpectrum<f32>;
pub type Model32 = model::Model<f32>;

