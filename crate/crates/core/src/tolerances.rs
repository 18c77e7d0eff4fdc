//! Central numerical tolerances.
//!
//! Scale-aware tolerances are provided as functions of the quantities they
//! guard; fixed ones are plain constants. Keeping them in one place keeps the
//! checkers and the test suite in agreement about what "zero" means.

/// Threshold on eigenvalue signs in the Lorentzian signature check.
pub const SIGNATURE_EIGEN_TOL: f64 = 1e-10;

/// A vector with `g(v,v)` within this of zero (after scaling) counts as null.
pub const CLASSIFY_TOL_BASE: f64 = 1e-10;

/// Segments of a causal curve may undershoot `g >= 0` by this much.
pub const NULL_TOL: f64 = 1e-10;

/// Target constancy of the Lorentzian speed after reparametrization.
pub const REPARAM_TOL: f64 = 1e-8;

/// Base factor for the essential-hull membership tolerance.
pub const HULL_TOL_BASE: f64 = 1e-6;

/// Interface continuity residual allowed on a metric field.
pub const INTERFACE_CONTINUITY_TOL: f64 = 1e-9;

/// Slack added to the sampled Lipschitz estimate check.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// Event location: bisection stops once `|s_j(x)|` is below this.
pub const EVENT_LEVEL_TOL: f64 = 1e-12;

/// Maximum bisection iterations for event location.
pub const EVENT_BISECTION_MAX: usize = 40;

/// Convex-hull projection is iterated until the duality gap certifies the
/// distance to this accuracy.
pub const HULL_PROJECTION_TOL: f64 = 1e-9;

/// Iteration cap for the hull projection.
pub const HULL_PROJECTION_MAX_ITERS: usize = 500;

/// Default finite-difference step for metric derivatives.
pub const FD_STEP: f64 = 1e-5;

/// Violations in inequality sweeps are counted below `-1e-12 * scale`.
pub const SWEEP_VIOLATION_BASE: f64 = 1e-12;

/// Default scale-aware classification tolerance, `1e-10 * (1 + ||v||^2)`.
pub fn classify_tol(v: &nalgebra::DVector<f64>) -> f64 {
    CLASSIFY_TOL_BASE * (1.0 + v.norm_squared())
}

/// Scale-aware essential-hull membership tolerance, `1e-6 * (1 + ||v||^2)`.
pub fn hull_tol(v: &nalgebra::DVector<f64>) -> f64 {
    HULL_TOL_BASE * (1.0 + v.norm_squared())
}
