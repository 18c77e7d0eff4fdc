use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the toolkit.
///
/// Validation-style failures (bad inputs, violated preconditions) and
/// numerical failures (non-convergence, inconsistent selection data) are kept
/// as separate variants so that callers can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix is not Lorentzian: {positive} positive / {negative} negative eigenvalues in dimension {dim}")]
    NotLorentzian {
        dim: usize,
        positive: usize,
        negative: usize,
    },

    #[error("signature loss at point {point:?}")]
    SignatureLoss { point: Vec<f64> },

    #[error("{what} must be positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },

    #[error("metric field is not normalized to the Minkowski product at the chart origin (deviation {deviation:e})")]
    NotOriginNormalized { deviation: f64 },

    #[error("point lies on the singular set: |s_{interface}| = {level:e} is within the interface margin")]
    OnSingularSet { interface: usize, level: f64 },

    #[error("degenerate neighborhood: rejection rate {rate:.3} while sampling the essential hull")]
    DegenerateNeighborhood { rate: f64 },

    #[error("inconsistent sliding data: tangency parameter {theta} outside [0,1]")]
    InconsistentSliding { theta: f64 },

    #[error("interfaces intersect near {point:?}; codimension-one Filippov selection does not apply")]
    InterfaceIntersection { point: Vec<f64> },

    #[error("curve is not uniformly timelike: |gamma'|_g = {speed:e} at parameter {param}")]
    NotUniformlyTimelike { param: f64, speed: f64 },

    #[error("curve is not causal: g(slope, slope) = {value:e} on segment {segment}")]
    NotCausal { segment: usize, value: f64 },

    #[error("endpoints are not causally related: no causal polygonal connector found")]
    NotCausallyRelated,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient sampling: window [{t}, {t_end}] contains {samples} samples, need at least {needed}")]
    InsufficientSampling {
        t: f64,
        t_end: f64,
        samples: usize,
        needed: usize,
    },

    #[error("vector is not in the open future causal cone (v_t = {vt}, <v,v> = {q})")]
    NotFutureCausal { vt: f64, q: f64 },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of numerical procedures rather than of input
    /// validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::InconsistentSliding { .. }
                | Error::DegenerateNeighborhood { .. }
        )
    }
}
