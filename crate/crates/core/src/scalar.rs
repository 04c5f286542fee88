//! Scalar abstraction: every numerical routine in this crate is generic over
//! a floating-point type implementing [`Real`]. `f64` is the working
//! precision for all shipped tools; `f32` is supported for callers that want
//! to trade accuracy for footprint.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the crate.
///
/// Bundles the `num_traits` capabilities the solvers need (transcendentals,
/// conversions from literals, compound assignment) plus the marker traits
/// required for parallel Monte-Carlo trials.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only on values unrepresentable in
    /// the target type (never for the constants used internally).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    /// Lossy view as `f64`, for diagnostics and error messages.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance floor: `max(tol, ulps * epsilon)`. Contract tolerances in
    /// this crate are stated for `f64`; narrower types widen them to a few
    /// ulps so the same algorithms remain usable.
    #[inline]
    fn tol_floor(tol: f64, ulps: f64) -> Self {
        Self::of(tol).max(Self::epsilon() * Self::of(ulps))
    }
}

impl Real for f32 {}
impl Real for f64 {}
