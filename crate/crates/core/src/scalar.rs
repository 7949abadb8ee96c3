//! Floating-point abstraction shared by every solver.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the clustering kernels are written against: `f32` or `f64`.
///
/// The pipeline and CLI run in `f64`; `f32` is available for memory-bound
/// callers who accept the extra rounding in the membership exponent chain.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` constants.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `self^exponent`, skipping `powf` for small integer exponents.
    #[inline]
    fn pow_real(self, exponent: Self) -> Self {
        if exponent == Self::one() {
            self
        } else if exponent == Self::of(2.0) {
            self * self
        } else if exponent == exponent.trunc() && exponent.abs() <= Self::of(16.0) {
            self.powi(exponent.to_i32().expect("small integer"))
        } else {
            self.powf(exponent)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
