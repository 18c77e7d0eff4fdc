//! Lorentzian length and direct search for maximal causal curves.
//!
//! The maximizer works on polygonal curves with a fixed parameter grid and
//! free interior nodes, ascending the discrete length functional by projected
//! gradient steps. Length is parametrization-invariant, so fixing the grid
//! removes the reparametrization gauge without losing any maximizer. The
//! result is the independent oracle against which Filippov geodesics are
//! compared.

use nalgebra::DVector;
use rand::Rng;

use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::filippov::{self, FilippovState, GeodesicTrajectory};
use crate::rng;
use crate::tolerances;

/// Lorentzian length of a sampled causal curve by composite midpoint
/// quadrature: each segment contributes `sqrt(g_mid(slope, slope)) * Δt`.
///
/// Errors if any segment is spacelike beyond the null tolerance.
pub fn lorentzian_length(curve: &SampledCurve, field: &MetricField) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..curve.len() - 1 {
        let slope = curve.segment_slope(i);
        let mid = curve.segment_midpoint(i);
        let q = field.eval_quadratic(&mid, &slope);
        if q < -tolerances::NULL_TOL * (1.0 + slope.norm_squared()) {
            return Err(Error::NotCausal {
                segment: i,
                value: q,
            });
        }
        total += q.max(0.0).sqrt() * (curve.params()[i + 1] - curve.params()[i]);
    }
    Ok(total)
}

/// Options for [`maximize_causal_curve`].
#[derive(Debug, Clone)]
pub struct MaximizeOptions {
    pub max_iters: usize,
    /// Initial line-search step as a fraction of the chart radius.
    pub init_step_fraction: f64,
    /// Terminate when the projected step per unit step size drops below this.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            init_step_fraction: 1e-2,
            residual_tol: 1e-9,
            seed: 0,
        }
    }
}

/// Result of the length maximization.
#[derive(Debug, Clone)]
pub struct MaximizationResult {
    pub curve: SampledCurve,
    pub length: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the projected gradient at the final iterate.
    pub first_order_residual: f64,
    /// True when the optimizer ran on the squared-integrand surrogate
    /// (near-lightlike configurations where the square root is
    /// ill-conditioned).
    pub surrogate_regime: bool,
}

/// Maximize Lorentzian length over `segments`-segment polygonal causal
/// curves from `x` to `y` by projected gradient ascent.
///
/// The causality projection shrinks a violating segment's spatial
/// displacement toward its time axis until the midpoint quadratic form is
/// restored; endpoints stay fixed. When the running length falls below 1e-6
/// the objective switches to the squared integrand, which keeps gradients
/// finite and shares its maximizers with the length on null configurations.
pub fn maximize_causal_curve(
    field: &MetricField,
    x: &DVector<f64>,
    y: &DVector<f64>,
    segments: usize,
    opts: &MaximizeOptions,
) -> Result<MaximizationResult> {
    let m = segments.max(2);
    let nodes = initial_connector(field, x, y, m)?;
    let mut nodes = nodes;
    let params: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();

    let scale = field.domain_radius();
    let mut step = opts.init_step_fraction * scale;
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut surrogate = false;

    for _ in 0..opts.max_iters {
        iterations += 1;
        let raw_length = objective(field, &params, &nodes, false);
        surrogate = raw_length < 1e-6;
        let current = objective(field, &params, &nodes, surrogate);

        let grad = gradient(field, &params, &nodes, surrogate);
        let grad_norm = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();

        // In the surrogate regime, curves that are feasible only to the null
        // tolerance carry objective noise of order null_tol per segment;
        // gains below that floor are feasibility artifacts, not ascent. On
        // lightlike-related endpoints this pins the optimizer to the exact
        // null polygon.
        let slope_scale = {
            let w = (&nodes[m] - &nodes[0]) / (params[m] - params[0]);
            1.0 + w.norm_squared()
        };
        let accept_floor = if surrogate {
            10.0 * tolerances::NULL_TOL * (params[m] - params[0]) * slope_scale
        } else {
            1e-15 * current.abs()
        };

        // Projected step with backtracking (Armijo factor 1e-4, halving).
        let mut alpha = step;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = nodes.clone();
            for i in 1..m {
                trial[i] = &nodes[i] + &grad[i - 1] * alpha;
            }
            project_causal(field, &params, &mut trial);
            let predicted: f64 = (1..m)
                .map(|i| grad[i - 1].dot(&(&trial[i] - &nodes[i])))
                .sum();
            let value = objective(field, &params, &trial, surrogate);
            if value >= current + 1e-4 * predicted && value > current + accept_floor {
                let moved: f64 = (1..m)
                    .map(|i| (&trial[i] - &nodes[i]).norm_squared())
                    .sum::<f64>()
                    .sqrt();
                residual = moved / alpha;
                nodes = trial;
                accepted = true;
                step = (alpha * 2.0).min(opts.init_step_fraction * scale);
                break;
            }
            alpha *= 0.5;
        }

        if !accepted {
            // No improving step: measure stationarity at the smallest scale.
            let mut trial = nodes.clone();
            let probe = step * 2f64.powi(-40);
            for i in 1..m {
                trial[i] = &nodes[i] + &grad[i - 1] * probe;
            }
            project_causal(field, &params, &mut trial);
            let moved: f64 = (1..m)
                .map(|i| (&trial[i] - &nodes[i]).norm_squared())
                .sum::<f64>()
                .sqrt();
            residual = moved / probe;
            converged = true;
            break;
        }
        if grad_norm <= opts.residual_tol || residual <= opts.residual_tol {
            converged = true;
            break;
        }
    }

    let length = objective(field, &params, &nodes, false);
    let curve = SampledCurve::new(params, nodes)?;
    Ok(MaximizationResult {
        length,
        curve,
        iterations,
        converged,
        first_order_residual: residual,
        surrogate_regime: surrogate,
    })
}

/// Find an initial causal polygonal connector from `x` to `y`.
///
/// The straight chord is tried first; if some segment is spacelike the path
/// is bowed in the time direction by an increasing bump until causal. Failure
/// after the bow reaches the chart scale means the endpoints are not
/// causally related at this resolution.
fn initial_connector(
    field: &MetricField,
    x: &DVector<f64>,
    y: &DVector<f64>,
    m: usize,
) -> Result<Vec<DVector<f64>>> {
    let chord = |beta: f64| -> Vec<DVector<f64>> {
        (0..=m)
            .map(|i| {
                let s = i as f64 / m as f64;
                let mut p = x * (1.0 - s) + y * s;
                p[0] += beta * s * (1.0 - s);
                p
            })
            .collect()
    };
    let causal = |nodes: &[DVector<f64>]| -> bool {
        nodes.windows(2).enumerate().all(|(i, w)| {
            let _ = i;
            let dt = 1.0 / m as f64;
            let slope = (&w[1] - &w[0]) / dt;
            let mid = (&w[1] + &w[0]) * 0.5;
            field.eval_quadratic(&mid, &slope) >= -tolerances::NULL_TOL * (1.0 + slope.norm_squared())
        })
    };

    let straight = chord(0.0);
    if causal(&straight) {
        return Ok(straight);
    }
    let mut beta = 1e-3 * field.domain_radius();
    while beta <= 4.0 * field.domain_radius() {
        let bowed = chord(beta);
        if causal(&bowed) {
            return Ok(bowed);
        }
        beta *= 2.0;
    }
    Err(Error::NotCausallyRelated)
}

fn segment_value(
    field: &MetricField,
    params: &[f64],
    nodes: &[DVector<f64>],
    i: usize,
    surrogate: bool,
) -> f64 {
    let dt = params[i + 1] - params[i];
    let slope = (&nodes[i + 1] - &nodes[i]) / dt;
    let mid = (&nodes[i + 1] + &nodes[i]) * 0.5;
    let q = field.eval_quadratic(&mid, &slope);
    if surrogate {
        q * dt
    } else {
        q.max(0.0).sqrt() * dt
    }
}

fn objective(field: &MetricField, params: &[f64], nodes: &[DVector<f64>], surrogate: bool) -> f64 {
    (0..nodes.len() - 1)
        .map(|i| segment_value(field, params, nodes, i, surrogate))
        .sum()
}

/// Finite-difference gradient with respect to the interior nodes; only the
/// two segments adjacent to a node contribute.
fn gradient(
    field: &MetricField,
    params: &[f64],
    nodes: &[DVector<f64>],
    surrogate: bool,
) -> Vec<DVector<f64>> {
    let n = nodes[0].len();
    let m = nodes.len() - 1;
    let fd = 1e-7 * (1.0 + field.domain_radius());
    let mut grad = Vec::with_capacity(m - 1);
    let mut work = nodes.to_vec();
    for i in 1..m {
        let mut gi = DVector::zeros(n);
        for d in 0..n {
            let local = |work: &[DVector<f64>]| {
                segment_value(field, params, work, i - 1, surrogate)
                    + segment_value(field, params, work, i, surrogate)
            };
            let orig = work[i][d];
            work[i][d] = orig + fd;
            let up = local(&work);
            work[i][d] = orig - fd;
            let down = local(&work);
            work[i][d] = orig;
            gi[d] = (up - down) / (2.0 * fd);
        }
        grad.push(gi);
    }
    grad
}

/// Causality retraction: sweep the segments and shrink the spatial
/// displacement of any violating segment about its spatial center (about the
/// fixed node when the segment touches an endpoint) until
/// `g_mid >= -null_tol`. Exact in constant metrics; a few sweeps handle the
/// interaction between neighboring segments.
fn project_causal(field: &MetricField, params: &[f64], nodes: &mut [DVector<f64>]) {
    let m = nodes.len() - 1;
    let n = nodes[0].len();
    for _ in 0..12 {
        let mut dirty = false;
        for i in 0..m {
            let dt = params[i + 1] - params[i];
            let slope = (&nodes[i + 1] - &nodes[i]) / dt;
            let mid = (&nodes[i + 1] + &nodes[i]) * 0.5;
            let tol = tolerances::NULL_TOL * (1.0 + slope.norm_squared());
            if field.eval_quadratic(&mid, &slope) >= -tol {
                continue;
            }
            dirty = true;
            // Largest rho in [0, 1] with the shrunk spatial displacement
            // causal; bisection on the midpoint quadratic form.
            let shrink = |rho: f64, nodes: &[DVector<f64>]| -> (DVector<f64>, DVector<f64>) {
                let mut a = nodes[i].clone();
                let mut b = nodes[i + 1].clone();
                for d in 1..n {
                    let center = if i == 0 {
                        a[d]
                    } else if i + 1 == m {
                        b[d]
                    } else {
                        0.5 * (a[d] + b[d])
                    };
                    a[d] = center + rho * (a[d] - center);
                    b[d] = center + rho * (b[d] - center);
                }
                (a, b)
            };
            let q_of = |rho: f64, nodes: &[DVector<f64>]| -> f64 {
                let (a, b) = shrink(rho, nodes);
                let slope = (&b - &a) / dt;
                let mid = (&b + &a) * 0.5;
                field.eval_quadratic(&mid, &slope)
            };
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..60 {
                let rho = 0.5 * (lo + hi);
                if q_of(rho, nodes) >= 0.0 {
                    lo = rho;
                } else {
                    hi = rho;
                }
            }
            let (a, b) = shrink(lo, nodes);
            nodes[i] = a;
            nodes[i + 1] = b;
        }
        if !dirty {
            break;
        }
    }
}

/// Options for [`shoot_geodesic`].
#[derive(Debug, Clone)]
pub struct ShootOptions {
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            step: 2e-3,
            tol: 1e-8,
            max_iters: 100,
        }
    }
}

/// Match a geodesic from `x` to `y` at parameter 1 by Newton iteration on
/// the initial velocity, using finite-difference Jacobians of the endpoint
/// map.
pub fn shoot_geodesic(
    field: &MetricField,
    x: &DVector<f64>,
    y: &DVector<f64>,
    v0_guess: &DVector<f64>,
    opts: &ShootOptions,
) -> Result<GeodesicTrajectory> {
    let n = field.dim();
    // A truncated (chart-exiting) trajectory still yields a usable endpoint:
    // its residual is large and Newton damping steers away from it.
    let endpoint = |v0: &DVector<f64>| -> Result<DVector<f64>> {
        let init = FilippovState::new(x.clone(), v0.clone());
        let traj = filippov::integrate_geodesic(field, &init, 1.0, opts.step)?;
        Ok(traj.last().x.clone())
    };

    let mut v0 = v0_guess.clone();
    let mut history = Vec::new();
    for _ in 0..opts.max_iters {
        let end = endpoint(&v0)?;
        let residual = (&end - y).norm();
        history.push(residual);
        if residual <= opts.tol {
            let init = FilippovState::new(x.clone(), v0);
            let traj = filippov::integrate_geodesic(field, &init, 1.0, opts.step)?;
            if !traj.exited_chart {
                return Ok(traj);
            }
            // The endpoint matched only on a trajectory that leaves the
            // chart: no interior solution was found.
            return Err(Error::NoConvergence {
                iterations: history.len(),
                residual,
            });
        }

        // Finite-difference Jacobian of the endpoint map.
        let fd = 1e-7 * (1.0 + v0.norm());
        let mut jac = nalgebra::DMatrix::zeros(n, n);
        for k in 0..n {
            let mut vp = v0.clone();
            vp[k] += fd;
            let col = (endpoint(&vp)? - &end) / fd;
            jac.set_column(k, &col);
        }
        let delta = jac
            .lu()
            .solve(&(y - &end))
            .ok_or(Error::NoConvergence {
                iterations: history.len(),
                residual,
            })?;

        // Damped update: halve until the residual does not increase.
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial = &v0 + &delta * lambda;
            if let Ok(end_trial) = endpoint(&trial) {
                if (end_trial - y).norm() < residual {
                    v0 = trial;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            v0 += delta;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual: *history.last().unwrap_or(&f64::INFINITY),
    })
}

/// Report of [`local_maximality_probe`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    /// Perturbations that kept the curve causal and strictly increased
    /// length.
    pub improving: usize,
    pub max_increase: f64,
    /// Trials discarded because no causal perturbation was found at any
    /// amplitude.
    pub skipped: usize,
}

/// Apply random smooth interior bump perturbations of sup-norm at most
/// `amplitude` that keep the curve causal and count those that strictly
/// increase the Lorentzian length. A maximal curve yields zero.
pub fn local_maximality_probe(
    curve: &SampledCurve,
    field: &MetricField,
    trials: usize,
    amplitude: f64,
    seed: u64,
) -> Result<ProbeReport> {
    let base_length = lorentzian_length(curve, field)?;
    let mut rng = rng::stream(seed, "maximality-probe");
    let n = curve.dim();
    let (a, b) = curve.param_range();
    let span = b - a;

    let mut improving = 0usize;
    let mut skipped = 0usize;
    let mut max_increase: f64 = 0.0;

    for _ in 0..trials {
        // Keep the bump support strictly interior so the endpoints stay put.
        let center: f64 = rng.random_range(0.2..0.8);
        let max_width = center.min(1.0 - center);
        let width = rng.random_range(0.1..max_width);
        let dir = rng::unit_vector(&mut rng, n);
        let mut amp = amplitude;

        let mut found = false;
        for _ in 0..8 {
            let perturbed = bump_perturbation(curve, &dir, a + center * span, width * span, amp);
            if perturbed.check_causal(field).is_ok() {
                let length = lorentzian_length(&perturbed, field)?;
                let gain = length - base_length;
                if gain > 1e-12 * (1.0 + base_length.abs()) {
                    improving += 1;
                    max_increase = max_increase.max(gain);
                }
                found = true;
                break;
            }
            amp *= 0.5;
        }
        if !found {
            skipped += 1;
        }
    }
    Ok(ProbeReport {
        trials,
        improving,
        max_increase,
        skipped,
    })
}

/// Smooth interior bump `amp * exp(1 − 1/(1 − u²))` applied along `dir`;
/// the first and last nodes are pinned regardless of the support.
fn bump_perturbation(
    curve: &SampledCurve,
    dir: &DVector<f64>,
    center: f64,
    width: f64,
    amp: f64,
) -> SampledCurve {
    let last = curve.len() - 1;
    let points: Vec<DVector<f64>> = curve
        .params()
        .iter()
        .zip(curve.points())
        .enumerate()
        .map(|(i, (&t, p))| {
            let u = (t - center) / width;
            if i == 0 || i == last || u.abs() >= 1.0 {
                p.clone()
            } else {
                let bump = (1.0 - 1.0 / (1.0 - u * u)).exp();
                p + dir * (amp * bump)
            }
        })
        .collect();
    SampledCurve::new(curve.params().to_vec(), points)
        .expect("perturbation preserves the parameter grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lvec;
    use crate::zoo::{self, MetricSpec};

    fn minkowski(n: usize) -> MetricField {
        zoo::make_metric(&MetricSpec::Minkowski {
            n,
            domain_radius: None,
        })
        .unwrap()
    }

    #[test]
    fn length_of_straight_timelike_line() {
        // sqrt(1 - 0.25) = sqrt(0.75)
        let field = minkowski(2);
        let curve = SampledCurve::line(&lvec(&[0.0, 0.0]), &lvec(&[1.0, 0.5]), 16);
        let length = lorentzian_length(&curve, &field).unwrap();
        assert!((length - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn length_of_lightlike_line_is_zero() {
        let field = minkowski(2);
        let curve = SampledCurve::line(&lvec(&[0.0, 0.0]), &lvec(&[1.0, 1.0]), 16);
        assert_eq!(lorentzian_length(&curve, &field).unwrap(), 0.0);
    }

    #[test]
    fn broken_path_is_shorter_than_the_chord() {
        // (0,0) -> (0.5,0.4) -> (1,0): 0.3 + 0.3 = 0.6 < sqrt(0.75).
        let field = minkowski(2);
        let params = vec![0.0, 0.5, 1.0];
        let points = vec![lvec(&[0.0, 0.0]), lvec(&[0.5, 0.4]), lvec(&[1.0, 0.0])];
        let curve = SampledCurve::new(params, points).unwrap();
        let length = lorentzian_length(&curve, &field).unwrap();
        assert!((length - 0.6).abs() < 1e-12);
        assert!(length < 0.75f64.sqrt());
    }

    #[test]
    fn spacelike_segment_is_rejected() {
        let field = minkowski(2);
        let curve = SampledCurve::line(&lvec(&[0.0, 0.0]), &lvec(&[0.5, 1.0]), 4);
        assert!(matches!(
            lorentzian_length(&curve, &field),
            Err(Error::NotCausal { .. })
        ));
    }

    #[test]
    fn minkowski_maximizer_is_the_straight_line() {
        let field = minkowski(2);
        let result = maximize_causal_curve(
            &field,
            &lvec(&[0.0, 0.0]),
            &lvec(&[1.0, 0.5]),
            16,
            &MaximizeOptions::default(),
        )
        .unwrap();
        assert!((result.length - 0.75f64.sqrt()).abs() <= 1e-6);
        for (i, p) in result.curve.points().iter().enumerate() {
            let s = i as f64 / 16.0;
            let expect = lvec(&[s, 0.5 * s]);
            assert!((p - expect).norm() <= 1e-6, "node {i} deviates");
        }
        assert!(result.converged);
        // The reported length is the length functional of the curve itself.
        let recomputed = lorentzian_length(&result.curve, &field).unwrap();
        assert!((result.length - recomputed).abs() <= 1e-12);
    }

    #[test]
    fn minkowski_maximizer_regularity_is_line_exact() {
        let field = minkowski(2);
        let result = maximize_causal_curve(
            &field,
            &lvec(&[0.0, 0.0]),
            &lvec(&[0.9, 0.3]),
            64,
            &MaximizeOptions::default(),
        )
        .unwrap();
        let report = crate::regularity::regularity_of_maximizer(&result.curve, &field).unwrap();
        assert!(report.line_exact, "alpha_hat {}", report.alpha_hat);
        assert_eq!(report.alpha_hat, 1.0);
    }

    #[test]
    fn lightlike_endpoints_keep_nodes_on_the_null_line() {
        let field = minkowski(2);
        let result = maximize_causal_curve(
            &field,
            &lvec(&[0.0, 0.0]),
            &lvec(&[1.0, 1.0]),
            16,
            &MaximizeOptions::default(),
        )
        .unwrap();
        assert!(result.length <= 1e-6);
        for (i, p) in result.curve.points().iter().enumerate() {
            let s = i as f64 / 16.0;
            assert!(
                (p - lvec(&[s, s])).norm() <= 1e-4,
                "node {i} off the null line: {p:?}"
            );
        }
        assert!(result.surrogate_regime);
    }

    #[test]
    fn spacelike_endpoints_are_not_causally_related() {
        let field = minkowski(2);
        assert!(matches!(
            maximize_causal_curve(
                &field,
                &lvec(&[0.0, 0.0]),
                &lvec(&[0.2, 0.9]),
                8,
                &MaximizeOptions::default()
            ),
            Err(Error::NotCausallyRelated)
        ));
    }

    #[test]
    fn shooting_in_minkowski_hits_exactly() {
        let field = minkowski(3);
        let x = lvec(&[0.0, 0.0, 0.0]);
        let y = lvec(&[0.8, 0.3, -0.2]);
        let guess = lvec(&[0.9, 0.1, 0.0]);
        let traj = shoot_geodesic(&field, &x, &y, &guess, &ShootOptions::default()).unwrap();
        assert!((traj.last().x.clone() - &y).norm() <= 1e-8);
        assert!((traj.first().v.clone() - (&y - &x)).norm() <= 1e-6);
    }

    #[test]
    fn shooting_in_conformal_field_converges() {
        let field =
            zoo::make_metric(&MetricSpec::Conformal { n: 2, eps: 0.1, domain_radius: None })
                .unwrap();
        let x = lvec(&[-0.3, 0.05]);
        let y = lvec(&[0.45, 0.25]);
        let guess = &y - &x;
        let traj = shoot_geodesic(&field, &x, &y, &guess, &ShootOptions::default()).unwrap();
        assert!((traj.last().x.clone() - &y).norm() <= 1e-8);
    }

    #[test]
    fn straight_line_admits_no_improving_perturbation() {
        let field = minkowski(2);
        let curve = SampledCurve::line(&lvec(&[0.0, 0.0]), &lvec(&[1.0, 0.4]), 64);
        let report = local_maximality_probe(&curve, &field, 1000, 1e-2, 5).unwrap();
        assert_eq!(report.improving, 0, "max increase {}", report.max_increase);
    }

    #[test]
    fn bent_path_is_improved_by_probing() {
        let field = minkowski(2);
        let params: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let points: Vec<_> = params
            .iter()
            .map(|&s| lvec(&[s, 0.3 * s + 0.2 * s * (1.0 - s)]))
            .collect();
        let curve = SampledCurve::new(params, points).unwrap();
        let report = local_maximality_probe(&curve, &field, 1000, 1e-2, 6).unwrap();
        assert!(report.improving > 0);
        assert!(report.max_increase > 0.0);
    }
}
