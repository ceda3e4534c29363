//! Scalar abstraction shared by the matrix, projection and search code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar usable as a matrix entry: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the value is unrepresentable.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Off-diagonal convergence threshold for the Jacobi eigensolver.
    fn eig_tolerance() -> Self;
}

impl Real for f32 {
    fn eig_tolerance() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn eig_tolerance() -> Self {
        1e-12
    }
}
