//! Floating-point scalar abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the bounds machinery is generic over: `f32` or `f64`.
///
/// Tolerances are expressed per type because the solver thresholds that make
/// sense in double precision are below the resolution of single precision.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Primal feasibility tolerance of the simplex, in normalized outcome units.
    const FEAS_TOL: f64;
    /// Reduced-cost tolerance of the simplex.
    const OPT_TOL: f64;
    /// Smallest admissible pivot magnitude.
    const PIVOT_TOL: f64;
    /// Relative gap at which the minimum-norm iteration stops.
    const MINNORM_TOL: f64;

    /// Converts an `f64` literal. Panics only for NaN-producing conversions,
    /// which cannot happen for finite inputs.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f64 {
    const FEAS_TOL: f64 = 1e-11;
    const OPT_TOL: f64 = 1e-11;
    const PIVOT_TOL: f64 = 1e-9;
    const MINNORM_TOL: f64 = 1e-14;
}

impl Real for f32 {
    const FEAS_TOL: f64 = 2e-5;
    const OPT_TOL: f64 = 2e-5;
    const PIVOT_TOL: f64 = 1e-4;
    const MINNORM_TOL: f64 = 1e-6;
}
