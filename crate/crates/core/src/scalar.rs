//! Floating-point scalar abstraction.
//!
//! All numeric machinery in this crate is generic over [`Scalar`], which is
//! `f32` or `f64`. Outward rounding is realized by stepping bounds one unit
//! in the last place, so the trait exposes `next_up`/`next_down` on top of
//! the usual `num_traits` float surface.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable as the scalar of intervals, boxes and models.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;
    /// Largest representable value strictly less than `self`.
    fn next_down(self) -> Self;
}

impl Scalar for f64 {
    fn next_up(self) -> Self {
        f64::next_up(self)
    }
    fn next_down(self) -> Self {
        f64::next_down(self)
    }
}

impl Scalar for f32 {
    fn next_up(self) -> Self {
        f32::next_up(self)
    }
    fn next_down(self) -> Self {
        f32::next_down(self)
    }
}

/// Converts an `f64` constant into the scalar type.
///
/// Panics if the value is not representable (never happens for the finite
/// constants used in this crate).
pub fn scalar<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("constant not representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ulp_steps_bracket() {
        let x = 1.0f64;
        assert!(Scalar::next_down(x) < x);
        assert!(Scalar::next_up(x) > x);
        assert_eq!(Scalar::next_up(Scalar::next_down(x)), x);
        // Stepping down from +0 crosses into negative territory.
        assert!(Scalar::next_down(0.0f64) < 0.0);
        assert!(Scalar::next_up(0.0f32) > 0.0);
    }
}
