use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point element type for matrices, losses and analysis.
///
/// Implemented for `f32` and `f64`. Everything trained or gradient-checked in
/// this crate runs at `f64`; `f32` is available for inference-style use.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and config values.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
