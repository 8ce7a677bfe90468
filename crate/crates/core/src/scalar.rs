//! Scalar abstraction for the finite-kernel math.
//!
//! Kernels, distributions and divergences are generic over [`Scalar`] so the
//! same code runs in `f32` and `f64`. Validation tolerances depend on the
//! precision, so each implementation carries its own.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed deviation of a probability vector's total from one.
    const MASS_TOLERANCE: f64;

    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const MASS_TOLERANCE: f64 = 1e-12;
}

impl Scalar for f32 {
    const MASS_TOLERANCE: f64 = 1e-5;
}

/// `x * ln(x / y)` with the usual conventions `0 ln 0 = 0` and `x ln(x/0) = +inf`.
pub(crate) fn xlogx_over<S: Scalar>(x: S, y: S) -> S {
    if x <= S::zero() {
        S::zero()
    } else if y <= S::zero() {
        S::infinity()
    } else {
        x * (x / y).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xlogx_conventions() {
        assert_eq!(xlogx_over(0.0f64, 0.0), 0.0);
        assert_eq!(xlogx_over(0.5f64, 0.0), f64::INFINITY);
        assert!((xlogx_over(0.5f64, 0.25) - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((xlogx_over(0.5f32, 0.25) - 0.5 * 2f32.ln()).abs() < 1e-6);
    }
}
