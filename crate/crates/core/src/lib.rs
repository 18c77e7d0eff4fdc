//! Numerical toolkit for causal curves in low-regularity Lorentzian metrics.
//!
//! Everything lives in a single chart `U ⊂ ℝⁿ` with signature `+−−…−`. The
//! toolkit provides:
//!
//! - Lorentzian linear algebra and causal classification ([`algebra`]);
//! - piecewise-smooth metric fields with Lipschitz estimates ([`field`]) and a
//!   zoo of test metrics: Minkowski, conformal perturbations, impulsive waves
//!   in Rosen form, Hölder kinks, thin shells ([`zoo`]);
//! - Christoffel symbols via the Koszul formula and the essential convex hull
//!   of their values near a phase point ([`connection`]);
//! - event-driven integration of the geodesic equation as a differential
//!   inclusion, with crossing/sliding selection at interfaces ([`filippov`]);
//! - direct maximization of Lorentzian length over polygonal causal curves,
//!   shooting, and local maximality probes ([`maximality`]);
//! - chord-deviation profiles and Hölder-exponent estimation for curve
//!   derivatives ([`regularity`]);
//! - samplers and checkers for the quantitative reverse triangle inequality
//!   and related velocity/length bounds ([`inequalities`]).
//!
//! All operations are pure and all types are immutable after construction, so
//! everything can be shared freely across parallel workers. Monte Carlo
//! operations take explicit seeds; nothing reads the wall clock.

pub mod algebra;
pub mod connection;
pub mod curve;
pub mod error;
pub mod field;
pub mod filippov;
pub mod inequalities;
pub mod io;
pub mod maximality;
pub mod regularity;
pub mod rng;
pub mod tolerances;
pub mod zoo;

pub use algebra::{BilinearForm, CausalClass};
pub use curve::SampledCurve;
pub use error::{Error, Result};
pub use field::MetricField;
pub use filippov::{FilippovState, GeodesicTrajectory};
pub use zoo::MetricSpec;

/// Convenience constructor for a coordinate vector.
pub fn lvec(coords: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(coords)
}
