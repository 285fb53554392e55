//! Numeric scalar abstraction.
//!
//! Everything in this crate is generic over the floating point type used for
//! probabilities, rewards and returns. `f64` is the default through the type
//! aliases at the crate root; `f32` works too, with looser tolerances.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite values, which never happens for `f32`/`f64`.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal representable in scalar type")
    }

    /// Tolerance used when checking that probability rows sum to one.
    fn row_sum_tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Absolute slack used when comparing returns that were computed along
    /// different arithmetic paths.
    fn return_slack(scale: Self) -> Self {
        let unit = Self::one().max(scale.abs());
        (Self::lit(1e-12).max(Self::epsilon() * Self::lit(256.0))) * unit
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
