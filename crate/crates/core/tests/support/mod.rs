//! Shared oracles for the integration tests.
//!
//! Everything here is independent of the library's integration and
//! optimization paths: closed-form geodesics of the impulsive wave and
//! synthetic curves with prescribed derivative regularity.
#![allow(dead_code)] // each test target uses its own subset

use causalkit::curve::SampledCurve;
use causalkit::filippov::{FilippovState, GeodesicTrajectory};
use causalkit::lvec;
use nalgebra::DVector;

pub const SQRT2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Closed-form geodesic of the impulsive wave `2dudv − P²dx² − Q²dy²` with
/// `P = 1 + u₊`, `Q = 1 − u₊`, written in wave coordinates `(u, v, x, y)`.
///
/// The geodesic equations separate: `u` is affine, the transverse momenta
/// `P²x'` and `Q²y'` are conserved, and `v` follows from the conserved
/// Lorentzian energy. Crossing the impulse keeps position and velocity
/// continuous.
#[derive(Debug, Clone)]
pub struct RosenOracle {
    pub u0: f64,
    pub v0: f64,
    pub x0: f64,
    pub y0: f64,
    /// du/dtau, constant; must be positive to cross the impulse forward.
    pub p: f64,
    pub vdot0: f64,
    pub cx: f64,
    pub cy: f64,
    pub energy: f64,
}

impl RosenOracle {
    /// Initial data on the flat side (`u0 < 0`) with velocity
    /// `(p, vdot0, xdot0, ydot0)` in wave coordinates.
    pub fn new(u0: f64, v0: f64, x0: f64, y0: f64, p: f64, vdot0: f64, xdot0: f64, ydot0: f64) -> Self {
        assert!(u0 < 0.0 && p > 0.0, "start on the flat side moving forward");
        // P = Q = 1 there, so the conserved momenta equal the velocities.
        let energy = 2.0 * p * vdot0 - xdot0 * xdot0 - ydot0 * ydot0;
        Self {
            u0,
            v0,
            x0,
            y0,
            p,
            vdot0,
            cx: xdot0,
            cy: ydot0,
            energy,
        }
    }

    /// Parameter at which the geodesic meets the impulse `u = 0`.
    pub fn impulse_tau(&self) -> f64 {
        -self.u0 / self.p
    }

    /// Position and velocity in wave coordinates at parameter `tau`.
    pub fn eval_wave(&self, tau: f64) -> ([f64; 4], [f64; 4]) {
        let tau_star = self.impulse_tau();
        if tau <= tau_star {
            let pos = [
                self.u0 + self.p * tau,
                self.v0 + self.vdot0 * tau,
                self.x0 + self.cx * tau,
                self.y0 + self.cy * tau,
            ];
            let vel = [self.p, self.vdot0, self.cx, self.cy];
            return (pos, vel);
        }
        // State at the impulse.
        let v_star = self.v0 + self.vdot0 * tau_star;
        let x_star = self.x0 + self.cx * tau_star;
        let y_star = self.y0 + self.cy * tau_star;

        let sigma = tau - tau_star;
        let u = self.p * sigma;
        let p_cap = 1.0 + u;
        let q_cap = 1.0 - u;
        assert!(q_cap > 0.0, "oracle evaluated past the profile zero");

        // ∫ du/P² = 1 − 1/P, ∫ du/Q² = 1/Q − 1 from 0 to u.
        let ix = 1.0 - 1.0 / p_cap;
        let iy = 1.0 / q_cap - 1.0;
        let x = x_star + self.cx / self.p * ix;
        let y = y_star + self.cy / self.p * iy;
        let v = v_star
            + self.energy / (2.0 * self.p) * sigma
            + self.cx * self.cx / (2.0 * self.p * self.p) * ix
            + self.cy * self.cy / (2.0 * self.p * self.p) * iy;

        let xdot = self.cx / (p_cap * p_cap);
        let ydot = self.cy / (q_cap * q_cap);
        let vdot = (self.energy + self.cx * self.cx / (p_cap * p_cap)
            + self.cy * self.cy / (q_cap * q_cap))
            / (2.0 * self.p);
        ([u, v, x, y], [self.p, vdot, xdot, ydot])
    }

    /// Position and velocity in the chart coordinates `(t, z, x, y)` used by
    /// the zoo field: `t = (u + v)/√2`, `z = (v − u)/√2`.
    pub fn eval_chart(&self, tau: f64) -> (DVector<f64>, DVector<f64>) {
        let (pw, vw) = self.eval_wave(tau);
        (wave_to_chart(&pw), wave_to_chart(&vw))
    }

    /// Initial state in chart coordinates for the integrator.
    pub fn initial_state(&self) -> FilippovState {
        let (x, v) = self.eval_chart(0.0);
        FilippovState::new(x, v)
    }
}

pub fn wave_to_chart(w: &[f64; 4]) -> DVector<f64> {
    lvec(&[
        (w[0] + w[1]) * SQRT2_INV,
        (w[1] - w[0]) * SQRT2_INV,
        w[2],
        w[3],
    ])
}

/// Unit-speed plane curve with tangent angle `theta(s)` on `[-1, 1]`; its
/// derivative has exactly the Hölder regularity of `theta`.
pub fn angle_curve(n: usize, theta: impl Fn(f64) -> f64) -> SampledCurve {
    let a = -1.0;
    let b = 1.0;
    let mut params = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut p = lvec(&[0.0, 0.0]);
    let dt = (b - a) / n as f64;
    params.push(a);
    points.push(p.clone());
    for i in 0..n {
        let s = a + (i as f64 + 0.5) * dt;
        let th = theta(s);
        p = &p + lvec(&[th.cos(), th.sin()]) * dt;
        params.push(a + (i + 1) as f64 * dt);
        points.push(p.clone());
    }
    SampledCurve::new(params, points).unwrap()
}

/// Concatenate trajectories with matching junction states into one.
pub fn concatenate(pieces: Vec<GeodesicTrajectory>) -> GeodesicTrajectory {
    let mut iter = pieces.into_iter();
    let mut out = iter.next().expect("at least one piece");
    for piece in iter {
        let offset = if (piece.first().tau - out.last().tau).abs() < 1e-12 {
            1
        } else {
            0
        };
        out.states.extend(piece.states.into_iter().skip(offset));
        out.branch_ids.extend(piece.branch_ids.into_iter().skip(offset));
        out.events.extend(piece.events);
        out.exited_chart |= piece.exited_chart;
    }
    out
}

pub fn max_position_error(traj: &GeodesicTrajectory, oracle: &RosenOracle) -> f64 {
    traj.states
        .iter()
        .map(|s| {
            let (pos, _) = oracle.eval_chart(s.tau);
            (&s.x - pos).norm()
        })
        .fold(0.0, f64::max)
}
