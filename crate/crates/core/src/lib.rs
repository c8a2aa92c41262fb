//! Gaussian-process regression with four model-selection criteria: maximum
//! evidence, leave-one-out cross-validation, and Bayesian and β-noise
//! approximation set coding (ASC).
//!
//! The Gaussian algebra, kernels, GP objectives and ASC criteria are generic over
//! the scalar type ([`Real`], implemented for `f32` and `f64`). Hyperparameter
//! optimization and the experiment harness run in `f64`; the aliases below name
//! the `f64` instantiations used there.

pub mod asc;
pub mod error;
pub mod gaussian;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod optimizer;
pub mod scalar;

pub use asc::{AscConfig, AscVariant, Partition};
pub use error::{GpError, Result};
pub use kernels::{KernelStructure, MeanSpec};
pub use optimizer::{Criterion, ObjectiveSpec, OptResult};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type GaussianDist = gaussian::GaussianDist<f64>;
pub type JointGaussian = gaussian::JointGaussian<f64>;
pub type KernelSpec = kernels::KernelSpec<f64>;
pub type Dataset = gp::Dataset<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type AscScore = asc::AscScore<f64>;
