//! Constructors for the test metric fields used throughout the toolkit.
//!
//! All fields are normalized so that the metric at the chart origin is the
//! standard Minkowski product, the first coordinate is future-directed
//! timelike, and the time function grows with velocity at least 1/2 along
//! future-directed causal curves parametrized by Euclidean arclength. Chart
//! radii are chosen per kind so these normalizations hold by construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Interface, MetricBranch, MetricField};
use crate::lvec;

const SQRT2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Declarative description of a zoo metric, parsed from experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    /// Constant Minkowski product in dimension `n`.
    Minkowski {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    /// Conformally flat `g = (1 + eps·x_1)·eta` on a chart where the factor
    /// stays above 1/2.
    Conformal {
        n: usize,
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    /// Impulsive plane wave in Rosen form, rotated to chart coordinates
    /// `(t, z, x, y)` in which `g = dt² − dz² − (1+u₊)²dx² − (1−u₊)²dy²`
    /// with the null phase `u = (t − z)/√2`. Lipschitz, smooth off `{u = 0}`.
    RosenWave {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    /// `g = dt² − (1 + a·|x_1|^alpha)dx_1² − Σ dx_i²`: alpha-Hölder for
    /// `alpha < 1`, Lipschitz for `alpha = 1`.
    HolderKink {
        n: usize,
        alpha: f64,
        a: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
    /// Two affine branches glued continuously along `{x_1 = position}` with a
    /// jump in the metric gradient: `g_11 = −1 + slope·(x_1 − position)` with
    /// one slope per side.
    ThinShell {
        n: usize,
        #[serde(default)]
        position: f64,
        slope_minus: f64,
        slope_plus: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_radius: Option<f64>,
    },
}

impl MetricSpec {
    pub fn dimension(&self) -> usize {
        match self {
            MetricSpec::Minkowski { n, .. }
            | MetricSpec::Conformal { n, .. }
            | MetricSpec::HolderKink { n, .. }
            | MetricSpec::ThinShell { n, .. } => *n,
            MetricSpec::RosenWave { .. } => 4,
        }
    }
}

struct ConstantBranch {
    mat: DMatrix<f64>,
}

impl MetricBranch for ConstantBranch {
    fn eval(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.mat.clone()
    }

    fn partial(&self, x: &DVector<f64>, _k: usize) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(x.len(), x.len()))
    }
}

struct ConformalBranch {
    n: usize,
    eps: f64,
}

impl ConformalBranch {
    fn eta(n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = 1.0;
        for i in 1..n {
            m[(i, i)] = -1.0;
        }
        m
    }
}

impl MetricBranch for ConformalBranch {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        Self::eta(self.n) * (1.0 + self.eps * x[1])
    }

    fn partial(&self, _x: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        if k == 1 {
            Some(Self::eta(self.n) * self.eps)
        } else {
            Some(DMatrix::zeros(self.n, self.n))
        }
    }
}

/// Smooth branch of the Rosen wave for `u > 0`; evaluable slightly past the
/// impulse so event location can probe across it.
struct RosenWaveBranch;

impl RosenWaveBranch {
    fn phase(x: &DVector<f64>) -> f64 {
        (x[0] - x[1]) * SQRT2_INV
    }
}

impl MetricBranch for RosenWaveBranch {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let u = Self::phase(x);
        let p = 1.0 + u;
        let q = 1.0 - u;
        DMatrix::from_diagonal(&lvec(&[1.0, -1.0, -(p * p), -(q * q)]))
    }

    fn partial(&self, x: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        let u = Self::phase(x);
        let du_dk = match k {
            0 => SQRT2_INV,
            1 => -SQRT2_INV,
            _ => return Some(DMatrix::zeros(4, 4)),
        };
        // d/du of (-(1+u)^2, -(1-u)^2) on the x,y block.
        let d = lvec(&[0.0, 0.0, -2.0 * (1.0 + u), 2.0 * (1.0 - u)]);
        Some(DMatrix::from_diagonal(&d) * du_dk)
    }
}

struct HolderKinkBranch {
    n: usize,
    alpha: f64,
    a: f64,
    /// +1 for the branch on `x_1 > 0`, −1 for `x_1 < 0`.
    side: f64,
}

impl HolderKinkBranch {
    fn coeff_arg(&self, x: &DVector<f64>) -> f64 {
        (self.side * x[1]).max(0.0)
    }
}

impl MetricBranch for HolderKinkBranch {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = -(1.0 + self.a * self.coeff_arg(x).powf(self.alpha));
        for i in 2..self.n {
            m[(i, i)] = -1.0;
        }
        m
    }

    fn partial(&self, x: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.n, self.n);
        if k == 1 {
            let arg = self.coeff_arg(x);
            if arg > 0.0 {
                m[(1, 1)] = -self.side * self.a * self.alpha * arg.powf(self.alpha - 1.0);
            }
        }
        Some(m)
    }
}

struct ThinShellBranch {
    n: usize,
    position: f64,
    slope: f64,
}

impl MetricBranch for ThinShellBranch {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = -1.0 + self.slope * (x[1] - self.position);
        for i in 2..self.n {
            m[(i, i)] = -1.0;
        }
        m
    }

    fn partial(&self, _x: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.n, self.n);
        if k == 1 {
            m[(1, 1)] = self.slope;
        }
        Some(m)
    }
}

/// Build the metric field described by `spec` and validate its invariants on
/// a small sample.
pub fn make_metric(spec: &MetricSpec) -> Result<MetricField> {
    let field = build(spec)?;
    field.validate(200, 0)?;
    Ok(field)
}

fn build(spec: &MetricSpec) -> Result<MetricField> {
    match *spec {
        MetricSpec::Minkowski { n, domain_radius } => {
            require_dim(n)?;
            let mut mat = DMatrix::zeros(n, n);
            mat[(0, 0)] = 1.0;
            for i in 1..n {
                mat[(i, i)] = -1.0;
            }
            MetricField::smooth(
                n,
                Box::new(ConstantBranch { mat }),
                0.0,
                domain_radius.unwrap_or(1.0),
                "minkowski",
            )
        }
        MetricSpec::Conformal { n, eps, domain_radius } => {
            require_dim(n)?;
            // Keep the conformal factor in [0.55, 1.45] on the chart.
            let radius_cap = if eps.abs() > 1e-12 { 0.45 / eps.abs() } else { f64::INFINITY };
            let radius = domain_radius.unwrap_or_else(|| radius_cap.min(1.0));
            if radius > radius_cap {
                return Err(Error::InvalidParameter(format!(
                    "conformal chart radius {radius} exceeds {radius_cap} allowed by eps = {eps}"
                )));
            }
            MetricField::smooth(
                n,
                Box::new(ConformalBranch { n, eps }),
                eps.abs(),
                radius,
                "conformal",
            )
        }
        MetricSpec::RosenWave { domain_radius } => {
            // |u| <= radius keeps both profile factors in [1 - r, 1 + r];
            // radius 0.25 keeps the time-growth normalization.
            let radius = domain_radius.unwrap_or(0.25);
            if radius >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "Rosen chart radius {radius} reaches the profile zero at u = 1"
                )));
            }
            let flat = ConstantBranch {
                mat: DMatrix::from_diagonal(&lvec(&[1.0, -1.0, -1.0, -1.0])),
            };
            let interface = Interface::linear(lvec(&[SQRT2_INV, -SQRT2_INV, 0.0, 0.0]), 0.0);
            MetricField::new(
                4,
                vec![Box::new(flat), Box::new(RosenWaveBranch)],
                vec![interface],
                2.0 * (1.0 + radius),
                radius,
                "rosen_wave",
            )
        }
        MetricSpec::HolderKink { n, alpha, a, domain_radius } => {
            require_dim(n)?;
            if !(0.0 < alpha && alpha <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "holder_kink exponent must lie in (0, 1], got {alpha}"
                )));
            }
            if a < 0.0 {
                return Err(Error::NotPositive {
                    what: "holder_kink amplitude a",
                    value: a,
                });
            }
            let radius = domain_radius.unwrap_or(1.0);
            let mut normal = DVector::zeros(n);
            normal[1] = 1.0;
            let field = MetricField::new(
                n,
                vec![
                    Box::new(HolderKinkBranch { n, alpha, a, side: -1.0 }),
                    Box::new(HolderKinkBranch { n, alpha, a, side: 1.0 }),
                ],
                vec![Interface::linear(normal, 0.0)],
                a * alpha, // exact sup gradient for alpha = 1, nominal otherwise
                radius,
                "holder_kink",
            )?;
            Ok(field.with_holder_alpha(alpha))
        }
        MetricSpec::ThinShell {
            n,
            position,
            slope_minus,
            slope_plus,
            domain_radius,
        } => {
            require_dim(n)?;
            let max_slope = slope_minus.abs().max(slope_plus.abs());
            let radius_cap = if max_slope > 1e-12 {
                0.45 / max_slope - position.abs()
            } else {
                f64::INFINITY
            };
            if radius_cap <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "thin_shell slopes {slope_minus}/{slope_plus} leave no chart around position {position}"
                )));
            }
            let radius = domain_radius.unwrap_or_else(|| radius_cap.min(1.0));
            if radius > radius_cap {
                return Err(Error::InvalidParameter(format!(
                    "thin_shell chart radius {radius} exceeds {radius_cap}"
                )));
            }
            let mut normal = DVector::zeros(n);
            normal[1] = 1.0;
            MetricField::new(
                n,
                vec![
                    Box::new(ThinShellBranch { n, position, slope: slope_minus }),
                    Box::new(ThinShellBranch { n, position, slope: slope_plus }),
                ],
                vec![Interface::linear(normal, position)],
                max_slope,
                radius,
                "thin_shell",
            )
        }
    }
}

fn require_dim(n: usize) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "metric dimension must be >= 2, got {n}"
        )))
    }
}
