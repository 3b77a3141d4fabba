//! Scalar abstraction: every numerical kernel is generic over `Real`,
//! instantiated at `f32` or `f64` (see the aliases at the crate root).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Convert an `f64` constant, panicking only on genuinely unrepresentable input.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in this scalar type")
    }

    /// Lossy view as `f64`, for diagnostics and error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
