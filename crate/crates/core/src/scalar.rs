//! Scalar abstraction for signal data.
//!
//! The time base of the crate is exact integer nanoseconds; everything that
//! holds sampled signal values (IMU samples, row-intensity profiles, series)
//! is generic over [`Real`] so the same code runs on `f32` and `f64`.
//! Concrete `f64` aliases live at the crate root.

use std::fmt;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
///
/// `LowerExp`/`FromStr` are part of the contract so values written to text
/// streams in scientific notation round-trip bit-exactly.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    fn of_f64(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to any Real")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(|| Self::of_f64(n as f64))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("any Real converts to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Default
        + fmt::Debug
        + fmt::Display
        + fmt::LowerExp
        + FromStr
        + Send
        + Sync
        + 'static
{
}
