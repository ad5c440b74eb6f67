//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type satisfying [`Scalar`]. `f64` is the type the reference
//! tolerances are calibrated for; `f32` works for exploratory runs at looser
//! accuracy.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Off-diagonal convergence target for the Jacobi sweep, relative to
    /// the Frobenius norm of the input. Roughly 450 ulps: 1e-13 for `f64`.
    fn jacobi_tol() -> Self {
        Self::epsilon() * cast(450.0)
    }

    /// Symmetry slack accepted by constructors, relative to entry magnitude.
    fn symmetry_tol() -> Self {
        Self::epsilon() * cast(4.5e3)
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 constant converts into the scalar type")
}
