//! Dense symmetric linear algebra sized for desk-scale experiments (d ≤ 64):
//! row-major matrices, a cyclic-Jacobi eigensolver, positive-definite
//! matrices with a cached spectral decomposition, fractional powers, weighted
//! norms, trace products and matrix-pencil spectra.

mod jacobi;
mod matrix;
mod spd;

pub mod io;

pub use jacobi::sym_eig;
pub use matrix::Matrix;
pub use spd::{pencil_spectrum, trace_prod, weighted_norm_sq, SymmetricPd};
