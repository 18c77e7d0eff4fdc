//! Event-driven integration of the geodesic differential inclusion.
//!
//! Inside a smooth branch the dynamics are classical: `x'' = −Γ_x(x', x')`,
//! integrated by RK4. Interface crossings are located by bisection on the
//! level functions; at each event a Filippov selection decides between
//! transversal crossing (continue with the downstream branch) and sliding
//! (evolve with the convex combination of the one-sided accelerations that
//! keeps the state on the interface). Velocity is always continued
//! continuously across events: the inclusion bounds the acceleration, so the
//! velocity of a solution is absolutely continuous.
//!
//! Solutions of the inclusion are in general not unique and have no
//! extremality properties; the integrator returns one solution per input and
//! the maximality module provides the independent check against
//! length-maximizing curves.

use nalgebra::DVector;
use serde::Serialize;

use crate::connection::{self, hull_membership_margin, sample_essential_hull};
use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::tolerances;

/// Phase-space point evolved by the inclusion.
#[derive(Debug, Clone)]
pub struct FilippovState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub tau: f64,
}

impl FilippovState {
    pub fn new(x: DVector<f64>, v: DVector<f64>) -> Self {
        Self { x, v, tau: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventMode {
    Crossing,
    Sliding,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEvent {
    pub tau: f64,
    pub interface_id: usize,
    pub mode: EventMode,
    /// Convex-combination weight for sliding events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Output of the integrator: states with strictly increasing parameter, the
/// branch active at each state, and the located events.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub states: Vec<FilippovState>,
    pub branch_ids: Vec<usize>,
    pub events: Vec<TrajectoryEvent>,
    pub metric_ref: String,
    pub exited_chart: bool,
}

impl GeodesicTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &FilippovState {
        &self.states[0]
    }

    pub fn last(&self) -> &FilippovState {
        self.states.last().unwrap()
    }

    pub fn param_span(&self) -> f64 {
        self.last().tau - self.first().tau
    }

    /// Polygonal Euclidean length of the position curve.
    pub fn euclidean_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (&w[1].x - &w[0].x).norm())
            .sum()
    }

    /// Convert to a sampled curve carrying the integrator velocities.
    pub fn to_curve(&self) -> Result<SampledCurve> {
        let params = self.states.iter().map(|s| s.tau).collect();
        let points = self.states.iter().map(|s| s.x.clone()).collect();
        let velocities = self.states.iter().map(|s| s.v.clone()).collect();
        SampledCurve::new(params, points)?.with_velocities(velocities)
    }

    /// Relative drift of the conserved quantity `g(γ', γ')` along the
    /// trajectory.
    pub fn energy_drift(&self, field: &MetricField) -> f64 {
        let e0 = field.eval_quadratic(&self.states[0].x, &self.states[0].v);
        let scale = e0.abs().max(self.states[0].v.norm_squared()).max(1e-300);
        self.states
            .iter()
            .map(|s| (field.eval_quadratic(&s.x, &s.v) - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Largest difference quotient `||Δv|| / Δτ` between consecutive states;
    /// an upper estimate for the Lipschitz constant of `γ'`.
    pub fn velocity_lipschitz(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (&w[1].v - &w[0].v).norm() / (w[1].tau - w[0].tau))
            .fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.states.iter().map(|s| s.v.norm()).fold(0.0, f64::max)
    }
}

/// Outcome of the Filippov selection at an interface.
#[derive(Debug, Clone)]
pub enum Selection {
    /// Transversal crossing: continue with the downstream branch.
    Crossing {
        downstream_branch: usize,
        acceleration: DVector<f64>,
    },
    /// Both one-sided fields push toward the interface: slide with the
    /// tangency weight `theta` on the convex combination
    /// `theta·a⁺ + (1−theta)·a⁻`.
    Sliding {
        theta: f64,
        acceleration: DVector<f64>,
    },
}

/// Filippov selection at a state on interface `interface_id`.
///
/// With `φ(τ) = s_j(x(τ))` and the velocity continuous, `φ' = ∇s·v` does not
/// depend on the branch; the discontinuity sits in the acceleration. If
/// `|φ'|` is bounded away from zero the curve punches through: crossing with
/// the branch on the side of `sign(φ')`. Otherwise the decision is second
/// order: `φ''_± = v·H_s·v + ∇s·a_±` with the one-sided accelerations
/// `a_± = −Γ_±(v,v)`; opposite signs pushing inward give sliding with
/// `θ = φ''⁻ / (φ''⁻ − φ''⁺)`, anything else continues into the side the
/// dynamics select.
pub fn filippov_select(
    field: &MetricField,
    state: &FilippovState,
    interface_id: usize,
) -> Result<Selection> {
    let s = &field.interfaces()[interface_id];
    let level = s.value(&state.x);
    if level.abs() > 1e-10 * (1.0 + state.x.norm()) {
        return Err(Error::InvalidParameter(format!(
            "state is not on interface {interface_id}: s = {level:e}"
        )));
    }

    let base = field.branch_index(&state.x) & !(1 << interface_id);
    let branch_minus = base;
    let branch_plus = base | (1 << interface_id);
    let gamma_minus =
        connection::christoffel_for_branch(field, branch_minus, &state.x, tolerances::FD_STEP)?;
    let gamma_plus =
        connection::christoffel_for_branch(field, branch_plus, &state.x, tolerances::FD_STEP)?;
    let a_minus = -gamma_minus.quad(&state.v);
    let a_plus = -gamma_plus.quad(&state.v);

    let grad = s.gradient(&state.x);
    let phi_dot = grad.dot(&state.v);
    let tangency_tol = 1e-8 * (1.0 + state.v.norm());

    if phi_dot.abs() > tangency_tol {
        // Transversal: downstream side is where φ is headed.
        let (downstream_branch, acceleration) = if phi_dot > 0.0 {
            (branch_plus, a_plus)
        } else {
            (branch_minus, a_minus)
        };
        return Ok(Selection::Crossing {
            downstream_branch,
            acceleration,
        });
    }

    // Tangential contact: second-order condition on φ''.
    let hess = s.hessian(&state.x);
    let h_term = crate::algebra::quadratic(&hess, &state.v, &state.v);
    let phi_ddot_minus = h_term + grad.dot(&a_minus);
    let phi_ddot_plus = h_term + grad.dot(&a_plus);
    let accel_scale = 1.0 + a_minus.norm().max(a_plus.norm());

    if phi_ddot_minus > 0.0 && phi_ddot_plus < 0.0 {
        let theta = phi_ddot_minus / (phi_ddot_minus - phi_ddot_plus);
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InconsistentSliding { theta });
        }
        let acceleration = &a_plus * theta + &a_minus * (1.0 - theta);
        return Ok(Selection::Sliding {
            theta,
            acceleration,
        });
    }

    // Same-signed push (or a fictitious interface with equal accelerations):
    // continue into the side the dynamics point at. The repulsive case is
    // genuinely non-unique; the positive side is chosen deterministically.
    let (downstream_branch, acceleration) =
        if phi_ddot_plus > 0.0 || (phi_ddot_plus.abs() <= 1e-12 * accel_scale && phi_ddot_minus >= 0.0)
        {
            (branch_plus, a_plus)
        } else {
            (branch_minus, a_minus)
        };
    Ok(Selection::Crossing {
        downstream_branch,
        acceleration,
    })
}

fn rk4_step(
    field: &MetricField,
    branch: usize,
    x: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let acc = |x: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let gamma = connection::christoffel_for_branch(field, branch, x, tolerances::FD_STEP)?;
        Ok(-gamma.quad(v))
    };
    let k1x = v.clone();
    let k1v = acc(x, v)?;
    let x2 = x + &k1x * (h / 2.0);
    let v2 = v + &k1v * (h / 2.0);
    let k2x = v2.clone();
    let k2v = acc(&x2, &v2)?;
    let x3 = x + &k2x * (h / 2.0);
    let v3 = v + &k2v * (h / 2.0);
    let k3x = v3.clone();
    let k3v = acc(&x3, &v3)?;
    let x4 = x + &k3x * h;
    let v4 = v + &k3v * h;
    let k4x = v4.clone();
    let k4v = acc(&x4, &v4)?;
    let xn = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let vn = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    Ok((xn, vn))
}

/// One RK4 step of the sliding vector field: the acceleration is the convex
/// combination selected by the instantaneous tangency weight.
fn sliding_step(
    field: &MetricField,
    interface_id: usize,
    x: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let acc = |x: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let st = FilippovState {
            x: x.clone(),
            v: v.clone(),
            tau: 0.0,
        };
        match sliding_blend(field, &st, interface_id)? {
            (theta, a) if (0.0..=1.0).contains(&theta) => Ok(a),
            (_, a) => Ok(a),
        }
    };
    let k1x = v.clone();
    let k1v = acc(x, v)?;
    let x2 = x + &k1x * (h / 2.0);
    let v2 = v + &k1v * (h / 2.0);
    let k2v = acc(&x2, &v2)?;
    let x3 = x + &v2 * (h / 2.0);
    let v3 = v + &k2v * (h / 2.0);
    let k3v = acc(&x3, &v3)?;
    let x4 = x + &v3 * h;
    let v4 = v + &k3v * h;
    let k4v = acc(&x4, &v4)?;
    let xn = x + (k1x + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0);
    let vn = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    Ok((xn, vn))
}

/// True when the interface attracts the state from both sides and the
/// normal velocity cannot carry it further than one step of the one-sided
/// dynamics can turn around.
fn attracts_below_resolution(
    field: &MetricField,
    state: &FilippovState,
    interface_id: usize,
    step: f64,
) -> Result<bool> {
    let s = &field.interfaces()[interface_id];
    let base = field.branch_index(&state.x) & !(1 << interface_id);
    let gamma_minus =
        connection::christoffel_for_branch(field, base, &state.x, tolerances::FD_STEP)?;
    let gamma_plus = connection::christoffel_for_branch(
        field,
        base | (1 << interface_id),
        &state.x,
        tolerances::FD_STEP,
    )?;
    let grad = s.gradient(&state.x);
    let hess = s.hessian(&state.x);
    let h_term = crate::algebra::quadratic(&hess, &state.v, &state.v);
    let pm = h_term + grad.dot(&(-gamma_minus.quad(&state.v)));
    let pp = h_term + grad.dot(&(-gamma_plus.quad(&state.v)));
    let attracting = pm > 0.0 && pp < 0.0;
    let phi_dot = grad.dot(&state.v);
    Ok(attracting && phi_dot.abs() <= 0.5 * step * pm.abs().max(pp.abs()))
}

/// Tangency weight and blended acceleration for sliding along an interface.
fn sliding_blend(
    field: &MetricField,
    state: &FilippovState,
    interface_id: usize,
) -> Result<(f64, DVector<f64>)> {
    let s = &field.interfaces()[interface_id];
    let base = field.branch_index(&state.x) & !(1 << interface_id);
    let gamma_minus =
        connection::christoffel_for_branch(field, base, &state.x, tolerances::FD_STEP)?;
    let gamma_plus = connection::christoffel_for_branch(
        field,
        base | (1 << interface_id),
        &state.x,
        tolerances::FD_STEP,
    )?;
    let a_minus = -gamma_minus.quad(&state.v);
    let a_plus = -gamma_plus.quad(&state.v);
    let grad = s.gradient(&state.x);
    let hess = s.hessian(&state.x);
    let h_term = crate::algebra::quadratic(&hess, &state.v, &state.v);
    let pm = h_term + grad.dot(&a_minus);
    let pp = h_term + grad.dot(&a_plus);
    let denom = pm - pp;
    let theta = if denom.abs() < 1e-300 { 0.5 } else { pm / denom };
    let clamped = theta.clamp(0.0, 1.0);
    Ok((theta, &a_plus * clamped + &a_minus * (1.0 - clamped)))
}

/// Integrate the geodesic inclusion from `init` up to parameter `tau_end`
/// with base step `step`.
///
/// Events are located by bisection on the interface level functions to
/// `|s_j| <= 1e-12`; the trajectory is truncated with a flag if it leaves the
/// chart ball. Interfaces are handled one at a time; a state within the
/// event tolerance of two interfaces at once stops with a diagnostic.
pub fn integrate_geodesic(
    field: &MetricField,
    init: &FilippovState,
    tau_end: f64,
    step: f64,
) -> Result<GeodesicTrajectory> {
    if step <= 0.0 {
        return Err(Error::NotPositive {
            what: "integration step",
            value: step,
        });
    }
    if !field.contains(&init.x) {
        return Err(Error::InvalidParameter(
            "initial position outside the chart ball".into(),
        ));
    }
    if tau_end <= init.tau {
        return Err(Error::InvalidParameter(
            "tau_end must exceed the initial parameter".into(),
        ));
    }

    let mut x = init.x.clone();
    let mut v = init.v.clone();
    let mut tau = init.tau;
    let mut branch = initial_branch(field, &x, &v);
    let mut sliding_on: Option<usize> = None;

    let mut states = vec![FilippovState {
        x: x.clone(),
        v: v.clone(),
        tau,
    }];
    let mut branch_ids = vec![branch];
    let mut events = Vec::new();
    let mut exited_chart = false;

    // A start on an interface with tangential velocity may already be in a
    // sliding mode.
    for j in 0..field.interfaces().len() {
        let s = &field.interfaces()[j];
        if s.distance_estimate(&x) <= field.interface_margin()
            && s.gradient(&x).dot(&v).abs() <= 1e-8 * (1.0 + v.norm())
        {
            let st = FilippovState {
                x: x.clone(),
                v: v.clone(),
                tau,
            };
            if let Selection::Sliding { theta, .. } = filippov_select(field, &st, j)? {
                sliding_on = Some(j);
                events.push(TrajectoryEvent {
                    tau,
                    interface_id: j,
                    mode: EventMode::Sliding,
                    theta: Some(theta),
                });
                break;
            }
        }
    }

    let max_steps = ((tau_end - init.tau) / step).ceil() as usize * 4 + 64;
    let mut n_steps = 0usize;

    while tau < tau_end - 1e-15 && n_steps < max_steps {
        n_steps += 1;
        let h = step.min(tau_end - tau);

        if let Some(j) = sliding_on {
            // Check whether sliding remains consistent before stepping.
            let st = FilippovState {
                x: x.clone(),
                v: v.clone(),
                tau,
            };
            let (theta, _) = sliding_blend(field, &st, j)?;
            if !(0.0..=1.0).contains(&theta) {
                // The surface releases the trajectory; continue into the
                // side whose field pulls away.
                let base = field.branch_index(&x) & !(1 << j);
                branch = if theta > 1.0 { base | (1 << j) } else { base };
                nudge_off_interface(field, j, &mut x, branch);
                events.push(TrajectoryEvent {
                    tau,
                    interface_id: j,
                    mode: EventMode::Crossing,
                    theta: None,
                });
                sliding_on = None;
                continue;
            }
            let (xn, vn) = sliding_step(field, j, &x, &v, h)?;
            x = xn;
            v = vn;
            // Stabilize: project back onto the surface and remove the normal
            // velocity component built up by drift.
            let s = &field.interfaces()[j];
            for _ in 0..2 {
                let val = s.value(&x);
                let grad = s.gradient(&x);
                let gn = grad.norm_squared().max(1e-300);
                x -= &grad * (val / gn);
            }
            let grad = s.gradient(&x);
            let gn = grad.norm_squared().max(1e-300);
            v -= &grad * (grad.dot(&v) / gn);
            tau += h;
            if !field.contains(&x) {
                exited_chart = true;
            }
            states.push(FilippovState {
                x: x.clone(),
                v: v.clone(),
                tau,
            });
            branch_ids.push(field.branch_index(&x));
            if exited_chart {
                break;
            }
            continue;
        }

        // A state sitting on an interface (a step can land on the zero set
        // exactly, leaving no sign change to detect) is itself an event.
        let on_surface = (0..field.interfaces().len()).find(|&j| {
            field.interfaces()[j].value(&x).abs() <= tolerances::EVENT_LEVEL_TOL * (1.0 + x.norm())
        });
        if let Some(j) = on_surface {
            let st = FilippovState {
                x: x.clone(),
                v: v.clone(),
                tau,
            };
            match filippov_select(field, &st, j)? {
                Selection::Crossing {
                    downstream_branch, ..
                } => {
                    branch = downstream_branch;
                    nudge_off_interface(field, j, &mut x, branch);
                    events.push(TrajectoryEvent {
                        tau,
                        interface_id: j,
                        mode: EventMode::Crossing,
                        theta: None,
                    });
                }
                Selection::Sliding { theta, .. } => {
                    sliding_on = Some(j);
                    let s = &field.interfaces()[j];
                    let grad = s.gradient(&x);
                    let gn = grad.norm_squared().max(1e-300);
                    v -= &grad * (grad.dot(&v) / gn);
                    events.push(TrajectoryEvent {
                        tau,
                        interface_id: j,
                        mode: EventMode::Sliding,
                        theta: Some(theta),
                    });
                }
            }
            continue;
        }

        let before: Vec<f64> = field.interface_values(&x);
        let (x1, v1) = rk4_step(field, branch, &x, &v, h)?;
        let after: Vec<f64> = field.interface_values(&x1);

        // Earliest strict sign change over all interfaces.
        let mut hit: Option<(usize, f64)> = None;
        for j in 0..before.len() {
            if before[j] * after[j] < 0.0 {
                let sigma = bisect_event(field, branch, &x, &v, h, j, before[j])?;
                if hit.is_none_or(|(_, best)| sigma < best) {
                    hit = Some((j, sigma));
                }
            }
        }

        match hit {
            None => {
                x = x1;
                v = v1;
                tau += h;
                if !field.contains(&x) {
                    exited_chart = true;
                }
                states.push(FilippovState {
                    x: x.clone(),
                    v: v.clone(),
                    tau,
                });
                branch_ids.push(branch);
                if exited_chart {
                    break;
                }
            }
            Some((j, sigma)) => {
                let (xe, ve) = rk4_step(field, branch, &x, &v, sigma)?;
                x = xe;
                v = ve;
                tau += sigma;
                // An event landing within rounding of the previous grid
                // state would leave a near-duplicate knot; replace it.
                if tau - states.last().unwrap().tau <= 1e-9 * step && states.len() > 1 {
                    states.pop();
                    branch_ids.pop();
                }

                // Two interfaces meeting at the event point is out of scope
                // for codimension-one selection.
                let near: Vec<usize> = field
                    .interfaces()
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.distance_estimate(&x) < 1e-9 * (1.0 + x.norm()))
                    .map(|(k, _)| k)
                    .collect();
                if near.len() > 1 {
                    return Err(Error::InterfaceIntersection {
                        point: x.iter().copied().collect(),
                    });
                }

                let st = FilippovState {
                    x: x.clone(),
                    v: v.clone(),
                    tau,
                };
                let selection = filippov_select(field, &st, j)?;
                // Chattering capture: when the surface attracts from both
                // sides and the normal velocity is below what one step of
                // the one-sided dynamics can reverse, the oscillation is
                // sub-resolution and the Filippov solution is the slide.
                let selection = match selection {
                    Selection::Crossing { .. } if attracts_below_resolution(field, &st, j, h)? => {
                        let (theta, acceleration) = sliding_blend(field, &st, j)?;
                        Selection::Sliding {
                            theta: theta.clamp(0.0, 1.0),
                            acceleration,
                        }
                    }
                    other => other,
                };
                match selection {
                    Selection::Crossing {
                        downstream_branch, ..
                    } => {
                        branch = downstream_branch;
                        nudge_off_interface(field, j, &mut x, branch);
                        events.push(TrajectoryEvent {
                            tau,
                            interface_id: j,
                            mode: EventMode::Crossing,
                            theta: None,
                        });
                    }
                    Selection::Sliding { theta, .. } => {
                        sliding_on = Some(j);
                        let s = &field.interfaces()[j];
                        let grad = s.gradient(&x);
                        let gn = grad.norm_squared().max(1e-300);
                        v -= &grad * (grad.dot(&v) / gn);
                        events.push(TrajectoryEvent {
                            tau,
                            interface_id: j,
                            mode: EventMode::Sliding,
                            theta: Some(theta),
                        });
                    }
                }
                states.push(FilippovState {
                    x: x.clone(),
                    v: v.clone(),
                    tau,
                });
                branch_ids.push(branch);
            }
        }
    }

    Ok(GeodesicTrajectory {
        states,
        branch_ids,
        events,
        metric_ref: field.name().to_string(),
        exited_chart,
    })
}

/// Branch selection at the initial point; a start exactly on an interface is
/// assigned to the side the velocity points into.
fn initial_branch(field: &MetricField, x: &DVector<f64>, v: &DVector<f64>) -> usize {
    let mut branch = field.branch_index(x);
    for (j, s) in field.interfaces().iter().enumerate() {
        if s.distance_estimate(x) <= field.interface_margin() {
            let phi_dot = s.gradient(x).dot(v);
            if phi_dot > 0.0 {
                branch |= 1 << j;
            } else if phi_dot < 0.0 {
                branch &= !(1 << j);
            }
        }
    }
    branch
}

/// Bisect the step fraction at which interface `j` is met, to
/// `|s_j| <= 1e-12` or the iteration cap.
fn bisect_event(
    field: &MetricField,
    branch: usize,
    x: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
    j: usize,
    s_before: f64,
) -> Result<f64> {
    let level = |sigma: f64| -> Result<f64> {
        let (xs, _) = rk4_step(field, branch, x, v, sigma)?;
        Ok(field.interfaces()[j].value(&xs))
    };
    let mut lo = 0.0f64;
    let mut hi = h;
    let mut mid = h;
    for _ in 0..tolerances::EVENT_BISECTION_MAX {
        mid = 0.5 * (lo + hi);
        let val = level(mid)?;
        if val.abs() <= tolerances::EVENT_LEVEL_TOL {
            return Ok(mid);
        }
        if val * s_before > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Push a post-event state to the downstream side of the interface so that
/// sign bookkeeping matches the pinned branch and the on-surface detection
/// does not re-trigger. The displacement is a few event tolerances, far
/// below integration accuracy.
fn nudge_off_interface(field: &MetricField, j: usize, x: &mut DVector<f64>, branch: usize) {
    let s = &field.interfaces()[j];
    let want_positive = branch & (1 << j) != 0;
    let grad = s.gradient(x);
    let gn = grad.norm_squared().max(1e-300);
    let clearance = 4.0 * tolerances::EVENT_LEVEL_TOL * (1.0 + x.norm());
    for _ in 0..5 {
        let val = s.value(x);
        let ok = if want_positive { val > 0.0 } else { val < 0.0 };
        if ok && val.abs() >= clearance / 2.0 {
            break;
        }
        let target = if want_positive { clearance } else { -clearance };
        *x += &grad * ((target - val) / gn);
    }
}

/// Options for the constant-speed reparametrization.
#[derive(Debug, Clone)]
pub struct ReparOptions {
    /// Output sample count.
    pub samples: usize,
    /// RK4 substeps per output interval when solving for the time change.
    pub substeps: usize,
}

impl Default for ReparOptions {
    fn default() -> Self {
        Self {
            samples: 1025,
            substeps: 8,
        }
    }
}

/// Reparametrize a uniformly timelike curve to constant Lorentzian speed.
///
/// Solves `f'(t) = ℓ / |γ'(f(t))|_g` with `f(a₀) = a₀` by RK4 on a cubic
/// Hermite interpolant of the input. With `ell = None` the speed is chosen
/// as `ℒ(γ) / (b₀ − a₀)` so the output lives on the same parameter interval;
/// an explicit `ℓ` rescales the interval to `ℒ(γ)/ℓ`.
pub fn reparametrize_constant_speed(
    curve: &SampledCurve,
    field: &MetricField,
    ell: Option<f64>,
    opts: &ReparOptions,
) -> Result<SampledCurve> {
    let (a0, b0) = curve.param_range();
    let interp = HermiteCurve::from_curve(curve);

    // Uniform timelikeness, checked on the samples.
    for i in 0..curve.len() {
        let speed = field.norm_at(curve.point(i), &curve.velocity(i));
        let q = field.eval_quadratic(curve.point(i), &curve.velocity(i));
        if q <= 0.0 || speed <= tolerances::NULL_TOL * (1.0 + curve.velocity(i).norm()) {
            return Err(Error::NotUniformlyTimelike {
                param: curve.params()[i],
                speed,
            });
        }
    }

    let speed_at = |t: f64| -> f64 {
        let (p, v) = interp.eval(t.clamp(a0, b0));
        field.norm_at(&p, &v)
    };

    // Lorentzian length by composite Simpson on the interpolant.
    let panels = (curve.len() * 4).max(256);
    let mut length = 0.0;
    let dt = (b0 - a0) / panels as f64;
    for k in 0..panels {
        let t0 = a0 + k as f64 * dt;
        length += dt / 6.0 * (speed_at(t0) + 4.0 * speed_at(t0 + 0.5 * dt) + speed_at(t0 + dt));
    }

    let ell = match ell {
        Some(l) if l <= 0.0 => {
            return Err(Error::NotPositive {
                what: "target Lorentzian speed",
                value: l,
            })
        }
        Some(l) => l,
        None => length / (b0 - a0),
    };
    let b = a0 + length / ell;

    let samples = opts.samples.max(2);
    let mut params = Vec::with_capacity(samples);
    let mut points = Vec::with_capacity(samples);
    let mut velocities = Vec::with_capacity(samples);

    let mut f = a0;
    let out_dt = (b - a0) / (samples - 1) as f64;
    let h = out_dt / opts.substeps as f64;
    for k in 0..samples {
        let t = a0 + k as f64 * out_dt;
        params.push(t);
        let (p, v) = interp.eval(f.clamp(a0, b0));
        let fp = ell / field.norm_at(&p, &v);
        points.push(p);
        velocities.push(v * fp);
        if k + 1 < samples {
            for _ in 0..opts.substeps {
                // RK4 for f' = ell / |γ'(f)|_g.
                let k1 = ell / speed_at(f);
                let k2 = ell / speed_at(f + 0.5 * h * k1);
                let k3 = ell / speed_at(f + 0.5 * h * k2);
                let k4 = ell / speed_at(f + h * k3);
                f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
    }
    SampledCurve::new(params, points)?.with_velocities(velocities)
}

/// Cubic Hermite interpolant through curve samples with their velocities.
struct HermiteCurve {
    params: Vec<f64>,
    points: Vec<DVector<f64>>,
    velocities: Vec<DVector<f64>>,
}

impl HermiteCurve {
    fn from_curve(curve: &SampledCurve) -> Self {
        Self {
            params: curve.params().to_vec(),
            points: curve.points().to_vec(),
            velocities: (0..curve.len()).map(|i| curve.velocity(i)).collect(),
        }
    }

    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.params.len();
        let i = if t <= self.params[0] {
            0
        } else if t >= self.params[n - 1] {
            n - 2
        } else {
            match self
                .params
                .binary_search_by(|p| p.partial_cmp(&t).unwrap())
            {
                Ok(i) => i.min(n - 2),
                Err(i) => i - 1,
            }
        };
        let h = self.params[i + 1] - self.params[i];
        let s = (t - self.params[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let p = &self.points[i] * h00
            + &self.velocities[i] * (h10 * h)
            + &self.points[i + 1] * h01
            + &self.velocities[i + 1] * (h11 * h);
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let v = &self.points[i] * d00
            + &self.velocities[i] * d10
            + &self.points[i + 1] * d01
            + &self.velocities[i + 1] * d11;
        (p, v)
    }
}

/// Report of the Lemma-3.2-style velocity upper bound
/// `||γ'(t)|| <= (e^{Cr} − 1)/C · 1/(b − a)`.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityBoundReport {
    pub c: f64,
    pub euclidean_length: f64,
    pub param_span: f64,
    pub bound: f64,
    pub max_speed: f64,
    pub min_slack: f64,
}

/// Evaluate the velocity upper bound along a trajectory with chart constant
/// `c` (the bound on `||γ''||/||γ'||²`).
pub fn velocity_upper_bound_check(traj: &GeodesicTrajectory, c: f64) -> VelocityBoundReport {
    let r = traj.euclidean_length();
    let span = traj.param_span();
    // (e^{cr} - 1)/c -> r as c -> 0.
    let bound = if c.abs() < 1e-14 {
        r / span
    } else {
        ((c * r).exp() - 1.0) / c / span
    };
    let max_speed = traj.max_speed();
    VelocityBoundReport {
        c,
        euclidean_length: r,
        param_span: span,
        bound,
        max_speed,
        min_slack: bound - max_speed,
    }
}

/// Hull-membership residuals of `−γ''` along a curve.
#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub checks: usize,
    pub max_margin: f64,
    pub max_tolerance: f64,
    pub passed: bool,
}

/// Verify that the numerically differentiated acceleration of `curve` lies
/// in the sampled essential hull at `checks` random interior samples.
pub fn inclusion_residual_check(
    curve: &SampledCurve,
    field: &MetricField,
    checks: usize,
    delta: f64,
    hull_count: usize,
    seed: u64,
) -> Result<InclusionReport> {
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, "inclusion-check");
    let mut max_margin: f64 = 0.0;
    let mut max_tol: f64 = 0.0;
    for k in 0..checks {
        let i = rng.random_range(1..curve.len() - 1);
        let (t0, t1, t2) = (
            curve.params()[i - 1],
            curve.params()[i],
            curve.params()[i + 1],
        );
        let acc = ((curve.point(i + 1) - curve.point(i)) / (t2 - t1)
            - (curve.point(i) - curve.point(i - 1)) / (t1 - t0))
            * (2.0 / (t2 - t0));
        let state = FilippovState {
            x: curve.point(i).clone(),
            v: curve.velocity(i),
            tau: t1,
        };
        let sample = sample_essential_hull(
            field,
            &state,
            delta,
            hull_count,
            seed.wrapping_add(k as u64),
        )?;
        let margin = hull_membership_margin(&sample, &(-acc));
        max_margin = max_margin.max(margin);
        max_tol = max_tol.max(tolerances::hull_tol(&state.v));
    }
    Ok(InclusionReport {
        checks,
        max_margin,
        max_tolerance: max_tol,
        passed: max_margin <= max_tol,
    })
}

/// Report of the pointwise-limit stability check.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    /// Sup distance of each input trajectory to the limit curve.
    pub sup_distances: Vec<f64>,
    pub converged: bool,
    pub inclusion: InclusionReport,
}

/// Verify that a pointwise limit of Filippov geodesics is itself a Filippov
/// geodesic: the inputs converge uniformly to `limit` and the limit's
/// acceleration stays in the sampled essential hull.
pub fn pointwise_limit_is_geodesic(
    trajs: &[GeodesicTrajectory],
    limit: &SampledCurve,
    field: &MetricField,
    checks: usize,
    seed: u64,
) -> Result<LimitReport> {
    let mut sup_distances = Vec::with_capacity(trajs.len());
    for traj in trajs {
        let curve = traj.to_curve()?;
        sup_distances.push(curve.sup_distance(limit, 256));
    }
    let converged = match (sup_distances.first(), sup_distances.last()) {
        (Some(&first), Some(&last)) => last <= (0.9 * first).max(1e-10),
        _ => false,
    };
    let inclusion = inclusion_residual_check(limit, field, checks, 1e-3, 64, seed)?;
    Ok(LimitReport {
        sup_distances,
        converged,
        inclusion,
    })
}
