//! Scalar abstraction shared by every floating-point routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Convert an `f64` constant into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Convert an integer count into `Self`.
    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).expect("integer representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }

    /// Smallest tolerance the scalar can honour for iterative solvers.
    fn solver_floor() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `6 / pi^2`, the density of coprime pairs and of square-free integers.
pub fn six_over_pi_sq<T: Real>() -> T {
    T::lit(6.0) / (T::PI() * T::PI())
}

/// Compensated (Neumaier) summation over an iterator.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// `x * ln(x / y)` with the `0 * ln 0 = 0` convention.
pub fn xlogx_over<T: Real>(x: T, y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * (x / y).ln()
    }
}
