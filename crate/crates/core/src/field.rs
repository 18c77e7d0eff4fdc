//! Metric fields on a chart: smooth branches glued along interface
//! hypersurfaces.
//!
//! A [`MetricField`] consists of `2^k` smooth branches separated by `k`
//! scalar level sets `s_j`. The active branch at `x` is selected by the sign
//! vector of the `s_j(x)`; the metric is required to be continuous across
//! each interface, so the field is Lipschitz (or Hölder) continuous as a
//! whole while each branch stays smooth. A fully generic Lipschitz callable
//! is the special case of a single branch with no interfaces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::algebra::{self, BilinearForm};
use crate::error::{Error, Result};
use crate::rng;
use crate::tolerances;

/// One smooth branch of a metric field.
///
/// `eval` must be a smooth formula valid in a neighborhood of the whole
/// chart, not just on the branch's own side of the interfaces; the integrator
/// evaluates branches slightly across an interface while locating events.
pub trait MetricBranch: Send + Sync {
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Analytic partial derivative `∂_k g` at `x`, if available.
    /// Defaults to `None`, in which case callers fall back to central
    /// finite differences of `eval`.
    fn partial(&self, x: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        let _ = (x, k);
        None
    }
}

/// Branch backed by a plain closure, for user-supplied Lipschitz metrics.
pub struct ClosureBranch<F>(pub F);

impl<F> MetricBranch for ClosureBranch<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.0)(x)
    }
}

type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A scalar level set `s(x) = 0` separating two branches, with its gradient
/// and (optionally) Hessian. A missing Hessian means the level function is
/// affine.
pub struct Interface {
    value: ScalarFn,
    gradient: VectorFn,
    hessian: Option<MatrixFn>,
}

impl Interface {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
        }
    }

    /// Affine level set `c · x − offset`.
    pub fn linear(normal: DVector<f64>, offset: f64) -> Self {
        let grad = normal.clone();
        Self::new(
            move |x: &DVector<f64>| normal.dot(x) - offset,
            move |_x: &DVector<f64>| grad.clone(),
        )
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.hessian {
            Some(h) => h(x),
            None => DMatrix::zeros(x.len(), x.len()),
        }
    }

    /// Approximate Euclidean distance to the zero set, `|s(x)| / ||∇s(x)||`.
    pub fn distance_estimate(&self, x: &DVector<f64>) -> f64 {
        let g = self.gradient(x).norm();
        self.value(x).abs() / g.max(1e-300)
    }
}

/// Lorentzian metric field on a chart ball.
pub struct MetricField {
    dim: usize,
    branches: Vec<Box<dyn MetricBranch>>,
    interfaces: Vec<Interface>,
    lipschitz_l: f64,
    lipschitz_estimated: bool,
    domain_radius: f64,
    interface_margin: f64,
    holder_alpha: f64,
    name: String,
}

impl MetricField {
    /// Build a field from branches and interfaces.
    ///
    /// `branches.len()` must equal `2^interfaces.len()`: branch selection at
    /// `x` uses bit `j` of the index set when `s_j(x) >= 0`.
    pub fn new(
        dim: usize,
        branches: Vec<Box<dyn MetricBranch>>,
        interfaces: Vec<Interface>,
        lipschitz_l: f64,
        domain_radius: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "chart dimension must be >= 2, got {dim}"
            )));
        }
        if branches.len() != 1usize << interfaces.len() {
            return Err(Error::InvalidParameter(format!(
                "{} branches cannot be selected by {} interfaces",
                branches.len(),
                interfaces.len()
            )));
        }
        if domain_radius <= 0.0 {
            return Err(Error::NotPositive {
                what: "domain radius",
                value: domain_radius,
            });
        }
        if lipschitz_l < 0.0 {
            return Err(Error::NotPositive {
                what: "Lipschitz constant",
                value: lipschitz_l,
            });
        }
        Ok(Self {
            dim,
            branches,
            interfaces,
            lipschitz_l,
            lipschitz_estimated: false,
            domain_radius,
            interface_margin: 1e-8 * domain_radius,
            holder_alpha: 1.0,
            name: name.into(),
        })
    }

    /// Single smooth branch with no interfaces.
    pub fn smooth(
        dim: usize,
        branch: Box<dyn MetricBranch>,
        lipschitz_l: f64,
        domain_radius: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        Self::new(dim, vec![branch], Vec::new(), lipschitz_l, domain_radius, name)
    }

    /// Mark the Lipschitz constant as an estimate rather than a supplied
    /// value.
    pub fn with_estimated_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_l = l;
        self.lipschitz_estimated = true;
        self
    }

    /// Record the Hölder exponent of the field (1 for Lipschitz fields).
    pub fn with_holder_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    pub fn with_interface_margin(mut self, margin: f64) -> Self {
        self.interface_margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_l(&self) -> f64 {
        self.lipschitz_l
    }

    pub fn lipschitz_is_estimated(&self) -> bool {
        self.lipschitz_estimated
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn interface_margin(&self) -> f64 {
        self.interface_margin
    }

    /// Hölder exponent of the field in space (1 = Lipschitz).
    pub fn holder_alpha(&self) -> f64 {
        self.holder_alpha
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Index of the active branch at `x`.
    pub fn branch_index(&self, x: &DVector<f64>) -> usize {
        let mut idx = 0;
        for (j, s) in self.interfaces.iter().enumerate() {
            if s.value(x) >= 0.0 {
                idx |= 1 << j;
            }
        }
        idx
    }

    /// Metric matrix of branch `branch` evaluated at `x` (also valid slightly
    /// across interfaces).
    pub fn branch_matrix(&self, branch: usize, x: &DVector<f64>) -> DMatrix<f64> {
        self.branches[branch].eval(x)
    }

    /// Analytic `∂_k g` of branch `branch` at `x`, if the branch supplies it.
    pub fn branch_partial(&self, branch: usize, x: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        self.branches[branch].partial(x, k)
    }

    /// Metric matrix at `x` (active branch).
    pub fn matrix_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.branches[self.branch_index(x)].eval(x)
    }

    /// Checked bilinear form at `x`.
    pub fn form_at(&self, x: &DVector<f64>) -> Result<BilinearForm> {
        BilinearForm::new(self.matrix_at(x)).map_err(|_| Error::SignatureLoss {
            point: x.iter().copied().collect(),
        })
    }

    /// `g_x(u, v)` without a signature re-check.
    pub fn eval_bilinear(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        algebra::quadratic(&self.matrix_at(x), u, v)
    }

    /// `g_x(v, v)` without a signature re-check.
    pub fn eval_quadratic(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.eval_bilinear(x, v, v)
    }

    /// Lorentzian norm `|v|_x = sqrt(|g_x(v,v)|)`.
    pub fn norm_at(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.eval_quadratic(x, v).abs().sqrt()
    }

    /// Values of all interface level functions at `x`.
    pub fn interface_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.interfaces.iter().map(|s| s.value(x)).collect()
    }

    /// Smallest estimated distance from `x` to any interface, together with
    /// the closest interface id. `None` when the field has no interfaces.
    pub fn nearest_interface(&self, x: &DVector<f64>) -> Option<(usize, f64)> {
        self.interfaces
            .iter()
            .enumerate()
            .map(|(j, s)| (j, s.distance_estimate(x)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }

    /// True when `x` is inside the chart ball.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.norm() <= self.domain_radius
    }

    /// Deviation of `g` at the chart origin from the Minkowski product.
    pub fn origin_deviation(&self) -> f64 {
        let origin = DVector::zeros(self.dim);
        let eta = BilinearForm::minkowski(self.dim);
        (self.matrix_at(&origin) - eta.matrix()).abs().max()
    }

    /// Estimate the Lipschitz constant by sampling `pairs` random point
    /// pairs (global, near-interface, and coordinate-aligned) and unit
    /// vector pairs. The estimate approaches the true constant from below;
    /// callers should treat it as approximate.
    pub fn estimate_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = rng::stream(seed, "lipschitz-estimate");
        let n = self.dim;
        let mut best: f64 = 0.0;
        for trial in 0..pairs {
            let x = rng::ball_point(&mut rng, n, self.domain_radius);
            // Mix global pairs with short-range pairs straddling interfaces,
            // where the derivative jump is attained.
            let y = match trial % 3 {
                0 => rng::ball_point(&mut rng, n, self.domain_radius),
                1 => {
                    let d = rng::unit_vector(&mut rng, n);
                    let t: f64 = rng.random_range(1e-6..1e-2);
                    &x + d * (t * self.domain_radius)
                }
                _ => {
                    let mut y = x.clone();
                    if let Some((j, _)) = self.nearest_interface(&x) {
                        // reflect across the interface along its gradient
                        let s = &self.interfaces[j];
                        let g = s.gradient(&x);
                        let gn = g.norm_squared().max(1e-300);
                        y -= g * (2.0 * s.value(&x) / gn);
                    } else {
                        y = rng::ball_point(&mut rng, n, self.domain_radius);
                    }
                    y
                }
            };
            if !self.contains(&y) {
                continue;
            }
            let dist = (&x - &y).norm();
            if dist < 1e-14 {
                continue;
            }
            let gx = self.matrix_at(&x);
            let gy = self.matrix_at(&y);
            let diff = &gx - &gy;
            // |g_x(u,v) - g_y(u,v)| over unit u, v equals the operator norm
            // of the difference; probe it with coordinate axes and random
            // directions plus the dominant eigen direction via power steps.
            let mut dev: f64 = 0.0;
            for k in 0..n {
                for l in 0..n {
                    dev = dev.max(diff[(k, l)].abs());
                }
            }
            let mut v = rng::unit_vector(&mut rng, n);
            for _ in 0..8 {
                let w = &diff * &v;
                let wn = w.norm();
                if wn < 1e-300 {
                    break;
                }
                v = w / wn;
            }
            dev = dev.max((&diff * &v).norm());
            best = best.max(dev / dist);
        }
        best
    }

    /// Validate field invariants by sampling: signature at random points,
    /// continuity across every interface, and the Lipschitz bound.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<FieldValidation> {
        let mut rng = rng::stream(seed, "field-validate");
        let n = self.dim;

        for _ in 0..samples {
            let x = rng::ball_point(&mut rng, n, self.domain_radius);
            if algebra::check_lorentzian(&self.matrix_at(&x)).is_err() {
                return Err(Error::SignatureLoss {
                    point: x.iter().copied().collect(),
                });
            }
        }

        // Continuity across each interface: project random points onto the
        // zero set and compare the two adjacent branches.
        let mut continuity_residual: f64 = 0.0;
        for (j, s) in self.interfaces.iter().enumerate() {
            for _ in 0..samples.max(8) {
                let mut x = rng::ball_point(&mut rng, n, self.domain_radius);
                for _ in 0..60 {
                    let val = s.value(&x);
                    if val.abs() < 1e-13 {
                        break;
                    }
                    let g = s.gradient(&x);
                    let gn = g.norm_squared();
                    if gn < 1e-300 {
                        break;
                    }
                    x -= g * (val / gn);
                }
                if s.value(&x).abs() > 1e-10 || !self.contains(&x) {
                    continue;
                }
                let base = self.branch_index(&x) & !(1 << j);
                let g_minus = self.branches[base].eval(&x);
                let g_plus = self.branches[base | (1 << j)].eval(&x);
                continuity_residual = continuity_residual.max((g_minus - g_plus).abs().max());
            }
        }
        if continuity_residual > tolerances::INTERFACE_CONTINUITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "branches disagree on an interface by {continuity_residual:e}"
            )));
        }

        // Lipschitz bound on sampled pairs; only meaningful for alpha = 1.
        let mut lipschitz_worst: f64 = 0.0;
        if self.holder_alpha >= 1.0 {
            for _ in 0..samples {
                let x = rng::ball_point(&mut rng, n, self.domain_radius);
                let y = rng::ball_point(&mut rng, n, self.domain_radius);
                let dist = (&x - &y).norm();
                if dist < 1e-12 {
                    continue;
                }
                let u = rng::unit_vector(&mut rng, n);
                let v = rng::unit_vector(&mut rng, n);
                let dev = (self.eval_bilinear(&x, &u, &v) - self.eval_bilinear(&y, &u, &v)).abs();
                let excess = dev - self.lipschitz_l * dist - tolerances::LIPSCHITZ_SLACK;
                lipschitz_worst = lipschitz_worst.max(excess);
            }
            if lipschitz_worst > 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "sampled Lipschitz bound violated by {lipschitz_worst:e}"
                )));
            }
        }

        Ok(FieldValidation {
            samples,
            continuity_residual,
            lipschitz_excess: lipschitz_worst,
        })
    }
}

/// Outcome of [`MetricField::validate`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct FieldValidation {
    pub samples: usize,
    pub continuity_residual: f64,
    pub lipschitz_excess: f64,
}

/// Report from [`cone_inclusion_check`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConeCheckReport {
    pub samples: usize,
    /// Violations of `|g_x(v,v) − g^h(v,v)| <= 5·L·h` over unit vectors.
    pub deviation_violations: usize,
    /// Violations of `g_x(v,v) > 0 ⇒ g^h(v,v) > 0`.
    pub cone_violations: usize,
    /// Smallest value of `5Lh − |g_x(v,v) − g^h(v,v)|` observed (>= 0 means
    /// the bound held everywhere).
    pub worst_deviation_slack: f64,
    /// Smallest `g^h(v,v)` over sampled `g_x`-causal vectors.
    pub worst_causal_margin: f64,
}

/// Check that the widened product `g^h` dominates the field's light cones on
/// the ball of radius `h`.
///
/// Over `samples` random pairs `(x, v)` with `||x|| <= h` and unit `v`,
/// verifies `|g_x(v,v) − g^h(v,v)| <= 5·L·h`, and for the causal ones
/// (`g_x(v,v) >= 0`) that `g^h(v,v) > 0` whenever `g_x(v,v) > 0`. Requires
/// the field to be normalized so that `g` at the chart origin is the
/// Minkowski product.
pub fn cone_inclusion_check(
    field: &MetricField,
    lipschitz_l: f64,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<ConeCheckReport> {
    if h <= 0.0 {
        return Err(Error::NotPositive {
            what: "ball radius h",
            value: h,
        });
    }
    let deviation = field.origin_deviation();
    if deviation > 1e-9 {
        return Err(Error::NotOriginNormalized { deviation });
    }
    let n = field.dim();
    let gh = widened_matrix(n, lipschitz_l, h);
    let bound = 5.0 * lipschitz_l * h;

    let mut rng = rng::stream(seed, "cone-inclusion");
    let mut deviation_violations = 0;
    let mut cone_violations = 0;
    let mut worst_deviation_slack = f64::INFINITY;
    let mut worst_causal_margin = f64::INFINITY;

    for _ in 0..samples {
        let x = rng::ball_point(&mut rng, n, h);
        let v = rng::unit_vector(&mut rng, n);
        let qx = field.eval_quadratic(&x, &v);
        let qh = algebra::quadratic(&gh, &v, &v);
        let slack = bound - (qx - qh).abs();
        worst_deviation_slack = worst_deviation_slack.min(slack);
        if slack < 0.0 {
            deviation_violations += 1;
        }
        if qx > 0.0 {
            worst_causal_margin = worst_causal_margin.min(qh);
            if qh <= 0.0 {
                cone_violations += 1;
            }
        }
    }

    Ok(ConeCheckReport {
        samples,
        deviation_violations,
        cone_violations,
        worst_deviation_slack,
        worst_causal_margin,
    })
}

fn widened_matrix(n: usize, l: f64, h: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = 1.0 + 4.0 * l * h;
    for i in 1..n {
        m[(i, i)] = -1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lvec;
    use crate::zoo::{self, MetricSpec};

    #[test]
    fn minkowski_cone_check_is_clean() {
        let field = zoo::make_metric(&MetricSpec::Minkowski {
            n: 3,
            domain_radius: None,
        })
        .unwrap();
        let report = cone_inclusion_check(&field, 0.0, 0.2, 2000, 11).unwrap();
        assert_eq!(report.deviation_violations, 0);
        assert_eq!(report.cone_violations, 0);
        assert!(report.worst_deviation_slack >= 0.0);
    }

    #[test]
    fn understated_lipschitz_constant_is_detected() {
        // g = eta - x1 * dt^2 has true Lipschitz constant 1; supplying 1/2
        // makes the deviation bound fail near |x1| = h with v along the time
        // axis.
        let branch = ClosureBranch(move |x: &DVector<f64>| {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 0)] = 1.0 - x[1];
            m[(1, 1)] = -1.0;
            m
        });
        let field = MetricField::smooth(2, Box::new(branch), 1.0, 0.5, "adversarial").unwrap();
        let report = cone_inclusion_check(&field, 0.5, 0.1, 100_000, 5).unwrap();
        assert!(
            report.deviation_violations > 0,
            "understated L must be flagged, slack {}",
            report.worst_deviation_slack
        );

        // With the true constant the bound holds.
        let report = cone_inclusion_check(&field, 1.0, 0.1, 100_000, 5).unwrap();
        assert_eq!(report.deviation_violations, 0);
        assert_eq!(report.cone_violations, 0);
    }

    #[test]
    fn origin_normalization_is_enforced() {
        let branch = ClosureBranch(move |x: &DVector<f64>| {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 0)] = 2.0 + x[1];
            m[(1, 1)] = -1.0;
            m
        });
        let field = MetricField::smooth(2, Box::new(branch), 1.0, 0.5, "shifted").unwrap();
        assert!(matches!(
            cone_inclusion_check(&field, 1.0, 0.1, 10, 0),
            Err(Error::NotOriginNormalized { .. })
        ));
    }

    #[test]
    fn branch_selection_uses_interface_signs() {
        let field = zoo::make_metric(&MetricSpec::ThinShell {
            n: 2,
            position: 0.0,
            slope_minus: -0.2,
            slope_plus: 0.4,
            domain_radius: None,
        })
        .unwrap();
        assert_eq!(field.branch_index(&lvec(&[0.0, -0.3])), 0);
        assert_eq!(field.branch_index(&lvec(&[0.0, 0.3])), 1);
    }
}
