//! Closed-form and self-convergence oracles for the integrator, the shooting
//! solver, and the maximizer.

mod support;

use causalkit::filippov::{integrate_geodesic, reparametrize_constant_speed, FilippovState, ReparOptions};
use causalkit::lvec;
use causalkit::maximality::{
    local_maximality_probe, lorentzian_length, maximize_causal_curve, shoot_geodesic,
    MaximizeOptions, ShootOptions,
};
use causalkit::regularity::regularity_of_maximizer;
use causalkit::zoo::{make_metric, MetricSpec};
use support::RosenOracle;

fn rosen_case() -> RosenOracle {
    // Starts on the flat side, crosses the impulse at tau = 0.2, stays well
    // inside the chart ball of radius 0.25.
    RosenOracle::new(-0.1, 0.0, 0.0, 0.0, 0.5, 0.5, 0.3, 0.2)
}

#[test]
fn rosen_oracle_is_self_consistent() {
    let oracle = rosen_case();
    // Energy conservation across the impulse, straight from the formulas.
    for tau in [0.0, 0.1, 0.2, 0.25, 0.3] {
        let (pos, vel) = oracle.eval_wave(tau);
        let u = pos[0];
        let p_cap = 1.0 + u.max(0.0);
        let q_cap = 1.0 - u.max(0.0);
        let energy = 2.0 * vel[0] * vel[1]
            - p_cap * p_cap * vel[2] * vel[2]
            - q_cap * q_cap * vel[3] * vel[3];
        assert!(
            (energy - oracle.energy).abs() < 1e-12,
            "energy drift at tau = {tau}"
        );
    }
    // Continuity at the impulse.
    let eps = 1e-9;
    let (pm, vm) = oracle.eval_wave(oracle.impulse_tau() - eps);
    let (pp, vp) = oracle.eval_wave(oracle.impulse_tau() + eps);
    for i in 0..4 {
        assert!((pm[i] - pp[i]).abs() < 1e-6);
        assert!((vm[i] - vp[i]).abs() < 1e-6);
    }
}

/// Koszul output in chart coordinates, pulled back to wave coordinates by
/// the constant linear change, against the diagonal-metric closed forms
/// `Γ^x_ux = P'/P`, `Γ^y_uy = Q'/Q`, `Γ^v_xx = P·P'`, `Γ^v_yy = Q·Q'`.
#[test]
fn rosen_christoffels_match_diagonal_closed_form() {
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let u = 0.12;
    let s = support::SQRT2_INV;
    // Chart point with (t - z)/sqrt(2) = u.
    let t = 0.1;
    let z = t - u * std::f64::consts::SQRT_2;
    let point = lvec(&[t, z, 0.02, -0.01]);
    let gamma = causalkit::connection::christoffel_at(&field, &point).unwrap();

    // wave = a * chart, chart = a_inv * wave.
    let a = [
        [s, -s, 0.0, 0.0],
        [s, s, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let a_inv = [
        [s, s, 0.0, 0.0],
        [-s, s, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let wave_gamma = |c: usize, al: usize, be: usize| -> f64 {
        let mut total = 0.0;
        for k in 0..4 {
            if a[c][k] == 0.0 {
                continue;
            }
            for i in 0..4 {
                for j in 0..4 {
                    total += a[c][k] * gamma.gamma(k, i, j) * a_inv[i][al] * a_inv[j][be];
                }
            }
        }
        total
    };

    let p_cap = 1.0 + u;
    let q_cap = 1.0 - u;
    // Wave index order (u, v, x, y).
    let expected = |c: usize, al: usize, be: usize| -> f64 {
        match (c, al, be) {
            (2, 0, 2) | (2, 2, 0) => 1.0 / p_cap,
            (3, 0, 3) | (3, 3, 0) => -1.0 / q_cap,
            (1, 2, 2) => p_cap,
            (1, 3, 3) => -q_cap,
            _ => 0.0,
        }
    };
    for c in 0..4 {
        for al in 0..4 {
            for be in 0..4 {
                let got = wave_gamma(c, al, be);
                let want = expected(c, al, be);
                assert!(
                    (got - want).abs() <= 1e-10,
                    "wave Gamma^{c}_{al}{be} = {got}, expected {want}"
                );
            }
        }
    }
}

/// The maximizer in the alpha-Hölder kink field must clear the alpha/4
/// regularity floor attached to its report.
#[test]
fn holder_kink_maximizer_clears_regularity_floor() {
    let field = make_metric(&MetricSpec::HolderKink {
        n: 2,
        alpha: 0.5,
        a: 0.3,
        domain_radius: None,
    })
    .unwrap();
    let result = maximize_causal_curve(
        &field,
        &lvec(&[0.0, -0.2]),
        &lvec(&[0.8, 0.2]),
        32,
        &MaximizeOptions::default(),
    )
    .unwrap();
    let report = regularity_of_maximizer(&result.curve, &field).unwrap();
    let floor = report.theoretical_floor.unwrap();
    assert!((floor - 0.125).abs() < 1e-12, "floor {floor}");
    assert!(
        report.line_exact || report.alpha_hat >= floor - 0.05,
        "alpha_hat {} under the floor {floor}",
        report.alpha_hat
    );
}

#[test]
fn integrator_matches_rosen_closed_form() {
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let tau_end = 0.3;
    let traj = integrate_geodesic(&field, &oracle.initial_state(), tau_end, 1e-3).unwrap();
    assert!(!traj.exited_chart);
    assert_eq!(traj.events.len(), 1);

    let (pos, vel) = oracle.eval_chart(traj.last().tau);
    let pos_err = (&traj.last().x - pos).norm();
    let vel_err = (&traj.last().v - vel).norm();
    assert!(pos_err <= 1e-6, "position error {pos_err}");
    assert!(vel_err <= 1e-6, "velocity error {vel_err}");

    // Velocity is continuous across the impulse: the x-momentum P² x'
    // refracts the slope but not the velocity itself.
    let sup_err = support::max_position_error(&traj, &oracle);
    assert!(sup_err <= 1e-6, "sup position error {sup_err}");
}

#[test]
fn step_halving_orders() {
    // Away from events: conformal field, clean fourth order.
    let field = make_metric(&MetricSpec::Conformal {
        n: 3,
        eps: 0.3,
        domain_radius: None,
    })
    .unwrap();
    let init = FilippovState::new(lvec(&[0.0, 0.1, -0.05]), lvec(&[1.0, 0.25, -0.1]));
    let ends: Vec<_> = [0.02, 0.01, 0.005, 0.0025]
        .iter()
        .map(|&h| {
            integrate_geodesic(&field, &init, 0.64, h)
                .unwrap()
                .last()
                .x
                .clone()
        })
        .collect();
    let e1 = (&ends[0] - &ends[1]).norm();
    let e2 = (&ends[1] - &ends[2]).norm();
    let e3 = (&ends[2] - &ends[3]).norm();
    let order_a = (e1 / e2).log2();
    let order_b = (e2 / e3).log2();
    assert!(
        order_a >= 3.6 && order_b >= 3.6,
        "smooth-field orders {order_a:.2}, {order_b:.2} below 4"
    );

    // Through the impulse: the event splitting keeps at least second order.
    // Steps are chosen large enough that the errors sit above the rounding
    // floor of the closed-form comparison.
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let errs: Vec<f64> = [4e-2, 2e-2, 1e-2]
        .iter()
        .map(|&h| {
            let traj = integrate_geodesic(&field, &oracle.initial_state(), 0.3, h).unwrap();
            let (pos, _) = oracle.eval_chart(traj.last().tau);
            (&traj.last().x - pos).norm()
        })
        .collect();
    let order_c = (errs[0] / errs[1]).log2();
    let order_d = (errs[1] / errs[2]).log2();
    assert!(
        order_c >= 2.0 && order_d >= 2.0,
        "impulse orders {order_c:.2}, {order_d:.2} below 2, errors {errs:?}"
    );
}

#[test]
fn shooting_reproduces_rosen_refraction() {
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let start = oracle.initial_state();
    let (target, target_vel) = oracle.eval_chart(1.0 * 0.28);
    // Shoot over tau in [0, 1]: rescale the oracle velocity as the unknown.
    let guess = (&target - &start.x) * 1.0;
    let traj = shoot_geodesic(&field, &start.x, &target, &guess, &ShootOptions::default()).unwrap();
    assert!((traj.last().x.clone() - &target).norm() <= 1e-8);
    // The matched initial velocity reproduces the oracle's (scaled by the
    // parameter change 0.28).
    let expect_v0 = {
        let (_, v) = oracle.eval_chart(0.0);
        v * 0.28
    };
    assert!(
        (traj.first().v.clone() - expect_v0).norm() <= 1e-5,
        "matched velocity differs from refraction oracle"
    );
    let _ = target_vel;
}

#[test]
fn maximizer_matches_shot_geodesic_in_rosen_field() {
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let start = oracle.initial_state();
    let (target, _) = oracle.eval_chart(0.28);

    let guess = &target - &start.x;
    let shot = shoot_geodesic(&field, &start.x, &target, &guess, &ShootOptions::default()).unwrap();
    let shot_curve = shot.to_curve().unwrap();
    let shot_length = lorentzian_length(&shot_curve, &field).unwrap();

    let result = maximize_causal_curve(&field, &start.x, &target, 64, &MaximizeOptions::default())
        .unwrap();
    assert!(
        (result.length - shot_length).abs() <= 2e-4,
        "maximizer length {} vs geodesic length {shot_length}",
        result.length
    );
}

#[test]
fn rosen_geodesic_is_locally_maximal_and_c11() {
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let traj = integrate_geodesic(&field, &oracle.initial_state(), 0.3, 1e-3).unwrap();
    let curve = traj.to_curve().unwrap();

    let probe = local_maximality_probe(&curve, &field, 1000, 1e-3, 9).unwrap();
    assert_eq!(
        probe.improving, 0,
        "improving perturbations on a geodesic (max gain {})",
        probe.max_increase
    );

    let report = regularity_of_maximizer(&curve, &field).unwrap();
    assert!(
        report.alpha_hat >= 0.9 || report.line_exact,
        "alpha_hat {} below the C^{{1,1}} range",
        report.alpha_hat
    );
}

#[test]
fn conserved_rosen_momenta_along_integrated_geodesic() {
    // p_v = u' and the transverse momenta P²x', Q²y' are constant per
    // branch; check both sides of the impulse.
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let traj = integrate_geodesic(&field, &oracle.initial_state(), 0.3, 1e-3).unwrap();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for s in &traj.states {
        let u = (s.x[0] - s.x[1]) * support::SQRT2_INV;
        let udot = (s.v[0] - s.v[1]) * support::SQRT2_INV;
        let p_cap = 1.0 + u.max(0.0);
        let q_cap = 1.0 - u.max(0.0);
        let px = p_cap * p_cap * s.v[2];
        let py = q_cap * q_cap * s.v[3];
        worst.0 = worst.0.max((udot - oracle.p).abs());
        worst.1 = worst.1.max((px - oracle.cx).abs());
        worst.2 = worst.2.max((py - oracle.cy).abs());
    }
    assert!(worst.0 <= 1e-8 && worst.1 <= 1e-8 && worst.2 <= 1e-8, "momentum drift {worst:?}");
}

#[test]
fn constant_speed_reparametrization_preserves_conserved_speed() {
    // The Lorentzian speed of a geodesic is conserved; reparametrization
    // must reproduce exactly that constant.
    let field = make_metric(&MetricSpec::RosenWave { domain_radius: None }).unwrap();
    let oracle = rosen_case();
    let traj = integrate_geodesic(&field, &oracle.initial_state(), 0.3, 1e-3).unwrap();
    let curve = traj.to_curve().unwrap();
    let conserved = oracle.energy.sqrt();

    let out = reparametrize_constant_speed(&curve, &field, None, &ReparOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..out.len() {
        let sp = field.norm_at(out.point(i), &out.velocity(i));
        worst = worst.max((sp - conserved).abs());
    }
    assert!(worst <= 1e-6, "speed deviates from conserved value by {worst}");
}
