//! Sharp bounds on a conditional expectation function when the conditioning
//! variable is observed only in bins with a known distribution.
//!
//! The crate is generic over the scalar type; [`f64`] and [`f32`] aliases are
//! provided below. Start with [`domain::validate`], then either the closed
//! forms in [`analytic`] (monotone only) or the LP engine in [`numeric`]
//! (monotone and/or curvature constrained).
//!
//! ```
//! use cefbounds::{analytic, BinnedSampleF64, Direction, DistributionSpec, OutcomeRange};
//!
//! let sample = BinnedSampleF64::new(
//!     vec![0.0, 4.0, 7.0],
//!     vec![2.0, 4.0],
//!     Direction::Increasing,
//!     OutcomeRange::new(0.0, 20.0).unwrap(),
//! );
//! let v = cefbounds::validate(&sample, &DistributionSpec::uniform(0.0, 7.0), Default::default()).unwrap();
//! let b = analytic::cef_bounds_analytic(&v, 3.0).unwrap();
//! assert!(b.lower <= 2.0 && b.upper >= 2.0);
//! ```

pub mod analytic;
pub mod calibrate;
pub mod censorlab;
pub mod domain;
pub mod doublecensor;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod lp;
pub mod minnorm;
pub mod numeric;
pub mod scalar;

pub use domain::{
    validate, BinnedSample, CefEnvelope, Direction, DistributionSpec, GridCef, OutcomeRange, Provenance,
    StatisticSpec, ValidateOptions, Validated,
};
pub use error::{Error, Result, ValidationIssue};
pub use numeric::{
    bound_stat, cef_envelope_numeric, stage1_min_mse, ConstraintSet, NumericModel, NumericOptions, NumericWarning,
    StatBounds, StageOneResult,
};
pub use scalar::Real;

/// Version of the constraint semantics (curvature units, band tolerances).
/// Changes whenever the same inputs could produce different bounds.
pub const CONSTRAINT_SEMANTICS_VERSION: &str = "1";

pub type BinnedSampleF64 = BinnedSample<f64>;
pub type DistributionSpecF64 = DistributionSpec<f64>;
pub type OutcomeRangeF64 = OutcomeRange<f64>;
pub type CefEnvelopeF64 = CefEnvelope<f64>;
pub type StatisticSpecF64 = StatisticSpec<f64>;
pub type ConstraintSetF64 = ConstraintSet<f64>;
pub type StatBoundsF64 = StatBounds<f64>;

pub type BinnedSampleF32 = BinnedSample<f32>;
pub type DistributionSpecF32 = DistributionSpec<f32>;
pub type OutcomeRangeF32 = OutcomeRange<f32>;
pub type CefEnvelopeF32 = CefEnvelope<f32>;
pub type StatisticSpecF32 = StatisticSpec<f32>;
pub type ConstraintSetF32 = ConstraintSet<f32>;
pub type StatBoundsF32 = StatBounds<f32>;
