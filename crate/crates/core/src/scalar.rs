use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the set calculus and solvers are written against.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    /// Working tolerance for pivots and degeneracy tests. Roughly `1e-11`
    /// for `f64`, `1e-5` for `f32`.
    #[inline]
    fn pivot_tol() -> Self {
        Self::epsilon().powf(Self::lit(0.68))
    }

    /// Tolerance `tol`, floored at what the scalar can actually resolve.
    #[inline]
    fn tol_or_eps(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon().sqrt() * Self::lit(4.0))
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
