//! Numeric element type shared by feature matrices and learners.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point element of a feature matrix.
///
/// Implemented for `f32` and `f64`. Learners and statistics are written
/// against this trait; the crate root exposes `f64` aliases for the common
/// case.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`; values outside the range saturate.
    fn of(v: f64) -> Self {
        let x = Self::from_f64(v).unwrap_or_else(Self::nan);
        if x.is_infinite() && v.is_finite() {
            if v > 0.0 {
                Self::max_value()
            } else {
                Self::min_value()
            }
        } else {
            x
        }
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(<f32 as Scalar>::of(1.5), 1.5f32);
        assert_eq!(<f64 as Scalar>::of(-2.25).as_f64(), -2.25);
        assert_eq!(<f32 as Scalar>::of(1e300), f32::MAX);
    }
}
