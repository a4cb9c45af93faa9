//! Scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented by `f32` and `f64`. All default tolerances in this crate are
/// calibrated for `f64`, the crate-level [`crate::Real`] alias.
pub trait Scalar: Float + Sum + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite literal must convert")
    }

    /// Lossy view of this scalar as `f64`, for diagnostics and error messages.
    fn lossy_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + Sum + Debug + Display + Send + Sync + 'static {}
