//! A laboratory for preconditioned stochastic gradient descent: the
//! optimizer itself, the geometric constants that govern its contraction,
//! replace-one stability estimators, closed-form risk bounds with exact
//! second-moment oracles, and the hard-instance constructions behind the
//! lower bounds. Everything needed to instantiate each inequality
//! numerically on synthetic problems at desk scale.
//!
//! Core math is generic over the scalar type via [`scalar::Scalar`]
//! (`f64` and `f32`); the aliases at the crate root fix the `f64`
//! instantiations the command-line harness uses.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod problems;
pub mod psgd;
pub mod rng;
pub mod scalar;
pub mod stability;
pub mod verify;

pub use error::{LabError, Result};

/// f64 dense matrix.
pub type Mat = linalg::Matrix<f64>;
/// f64 symmetric positive-definite matrix with cached eigendecomposition.
pub type Spd = linalg::SymmetricPd<f64>;
/// f32 dense matrix.
pub type Mat32 = linalg::Matrix<f32>;
/// f32 symmetric positive-definite matrix.
pub type Spd32 = linalg::SymmetricPd<f32>;
