//! Property tests for the algebraic invariants.

mod support;

use causalkit::algebra::{minkowski_norm, minkowski_product, widened_metric, BilinearForm};
use causalkit::lvec;
use causalkit::maximality::{lorentzian_length, maximize_causal_curve, MaximizeOptions};
use causalkit::regularity::{estimate_holder_exponent, sup_deviation};
use causalkit::zoo::{make_metric, MetricSpec};
use causalkit::SampledCurve;
use nalgebra::DVector;
use proptest::prelude::*;

fn bounded() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

/// Future-directed causal vector in dimension 3: time component in (0, 10],
/// spatial radius within the cone.
fn causal3() -> impl Strategy<Value = DVector<f64>> {
    (0.01..10.0f64, 0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(vt, r, phi)| {
        let rho = vt * r;
        lvec(&[vt, rho * phi.cos(), rho * phi.sin()])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lorentz_product_is_bilinear_and_symmetric(
        u0 in bounded(), u1 in bounded(), u2 in bounded(),
        v0 in bounded(), v1 in bounded(), v2 in bounded(),
        w0 in bounded(), w1 in bounded(), w2 in bounded(),
        a in bounded(), b in bounded(),
    ) {
        let g = BilinearForm::minkowski(3);
        let u = lvec(&[u0, u1, u2]);
        let v = lvec(&[v0, v1, v2]);
        let w = lvec(&[w0, w1, w2]);
        let scale = 1.0 + u.norm() * v.norm() + w.norm() * v.norm();
        let lhs = g.apply(&(&u * a + &w * b), &v).unwrap();
        let rhs = a * g.apply(&u, &v).unwrap() + b * g.apply(&w, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale * (1.0 + a.abs() + b.abs()));
        let sym = (g.apply(&u, &v).unwrap() - g.apply(&v, &u).unwrap()).abs();
        prop_assert!(sym <= 1e-12 * scale);
    }

    #[test]
    fn reverse_cauchy_schwarz_on_causal_pairs(u in causal3(), v in causal3()) {
        let scale = 1.0 + u.norm_squared() + v.norm_squared();
        let lhs = minkowski_product(&u, &v);
        let rhs = minkowski_norm(&u) * minkowski_norm(&v);
        prop_assert!(lhs >= rhs - 1e-12 * scale, "<u,v> = {lhs} < |u||v| = {rhs}");
    }

    #[test]
    fn widened_metric_is_monotone_in_h(
        l in 0.0..5.0f64,
        h1 in 0.001..1.0f64,
        dh in 0.0..1.0f64,
        v in causal3(),
    ) {
        let h2 = h1 + dh;
        let g1 = widened_metric(3, l, h1).unwrap();
        let g2 = widened_metric(3, l, h2).unwrap();
        let q1 = g1.apply(&v, &v).unwrap();
        let q2 = g2.apply(&v, &v).unwrap();
        prop_assert!(q2 >= q1 - 1e-12 * (1.0 + v.norm_squared()));
    }

    /// Replacing two adjacent segments of a causal polygon by their chord
    /// never decreases Lorentzian length under a constant metric.
    #[test]
    fn chord_replacement_never_decreases_length(u in causal3(), v in causal3()) {
        let norm_sum = minkowski_norm(&(&u + &v));
        let parts = minkowski_norm(&u) + minkowski_norm(&v);
        let scale = 1.0 + u.norm_squared() + v.norm_squared();
        prop_assert!(norm_sum >= parts - 1e-12 * scale);
    }
}

/// Maximization at a finer grid cannot lose length: the refined grid
/// contains the coarse polygon.
#[test]
fn refinement_monotonicity_of_the_maximizer() {
    let field = make_metric(&MetricSpec::Conformal {
        n: 2,
        eps: 0.15,
        domain_radius: None,
    })
    .unwrap();
    let x = lvec(&[-0.35, -0.1]);
    let y = lvec(&[0.35, 0.15]);
    let opts = MaximizeOptions::default();
    let mut previous: Option<f64> = None;
    for m in [8usize, 16, 32] {
        let result = maximize_causal_curve(&field, &x, &y, m, &opts).unwrap();
        if let Some(prev) = previous {
            assert!(
                result.length >= prev - 1e-9,
                "length dropped from {prev} to {} at m = {m}",
                result.length
            );
        }
        previous = Some(result.length);
    }
}

/// Discrete maximizer length converges to the geodesic length at second
/// order in the segment count. Minkowski is degenerate for this measurement
/// (polygons represent straight maximizers exactly at every m), so the
/// curved conformal field is used with a shooting reference.
#[test]
fn maximizer_convergence_order_in_segment_count() {
    use causalkit::maximality::{shoot_geodesic, ShootOptions};
    let field = make_metric(&MetricSpec::Conformal {
        n: 2,
        eps: 0.3,
        domain_radius: None,
    })
    .unwrap();
    let x = lvec(&[-0.5, -0.15]);
    let y = lvec(&[0.5, 0.2]);
    let guess = &y - &x;
    let shot = shoot_geodesic(&field, &x, &y, &guess, &ShootOptions::default()).unwrap();
    let reference = lorentzian_length(&shot.to_curve().unwrap(), &field).unwrap();

    let mut errors = Vec::new();
    let mut ms = Vec::new();
    for m in [8usize, 16, 32, 64] {
        let result = maximize_causal_curve(&field, &x, &y, m, &MaximizeOptions::default()).unwrap();
        errors.push((result.length - reference).abs().max(1e-14));
        ms.push(m as f64);
    }
    // Least-squares slope of log error against log m.
    let n = ms.len() as f64;
    let sx: f64 = ms.iter().map(|m| m.ln()).sum();
    let sy: f64 = errors.iter().map(|e| e.ln()).sum();
    let sxx: f64 = ms.iter().map(|m| m.ln().powi(2)).sum();
    let sxy: f64 = ms.iter().zip(&errors).map(|(m, e)| m.ln() * e.ln()).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!(
        slope <= -1.8,
        "convergence slope {slope:.2} too shallow; errors {errors:?}"
    );
}

/// Both directions of the chord-tube criterion on the synthetic family: the
/// deviation profile obeys `dev(h) <= C h^{1+alpha}` exactly when the fitted
/// exponent reaches alpha.
#[test]
fn tube_containment_matches_fitted_exponent() {
    let beta = 0.5;
    let curve = support::angle_curve(20_000, |s: f64| s.abs().powf(beta));
    let grid: Vec<f64> = (3..=11).map(|k| 2.0f64.powi(-k) * 2.0).collect();
    let report = estimate_holder_exponent(&curve, &grid).unwrap();
    assert!((report.alpha_hat - beta).abs() <= 0.05);

    // Tube with the true exponent: the normalized deviation stays bounded.
    let ratios_true: Vec<f64> = grid
        .iter()
        .map(|&h| sup_deviation(&curve, h).unwrap() / h.powf(1.0 + beta))
        .collect();
    let spread_true = ratios_true.iter().cloned().fold(0.0f64, f64::max)
        / ratios_true.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread_true <= 3.0, "true-exponent tube constant drifts: {ratios_true:?}");

    // Tube with an overstated exponent: the constant grows like h^{-1/4}
    // as h -> 0 (factor 4 over this grid).
    let ratios_over: Vec<f64> = grid
        .iter()
        .map(|&h| sup_deviation(&curve, h).unwrap() / h.powf(1.75))
        .collect();
    assert!(
        ratios_over.last().unwrap() > &(3.0 * ratios_over.first().unwrap()),
        "overstated exponent not rejected: {ratios_over:?}"
    );
}

/// The discrete maximizer inherits the regularity of the smooth field.
#[test]
fn maximizer_regularity_on_smooth_field() {
    use causalkit::regularity::regularity_of_maximizer;
    let field = make_metric(&MetricSpec::Conformal {
        n: 2,
        eps: 0.3,
        domain_radius: None,
    })
    .unwrap();
    let x = lvec(&[-0.5, -0.15]);
    let y = lvec(&[0.5, 0.2]);
    let result = maximize_causal_curve(&field, &x, &y, 64, &MaximizeOptions::default()).unwrap();
    let report = regularity_of_maximizer(&result.curve, &field).unwrap();
    assert!(
        report.alpha_hat >= 0.9 || report.line_exact,
        "maximizer alpha_hat {}",
        report.alpha_hat
    );
}

/// A causal curve in a normalized chart, parametrized by arclength, is
/// 2-bilipschitz.
#[test]
fn causal_curves_are_two_bilipschitz_in_normalized_charts() {
    let field = make_metric(&MetricSpec::Minkowski { n: 2, domain_radius: None }).unwrap();
    let dir = lvec(&[1.0, 0.6]);
    let unit = &dir / dir.norm();
    let m = 64;
    let params: Vec<f64> = (0..=m).map(|i| 0.9 * i as f64 / m as f64).collect();
    let points: Vec<_> = params.iter().map(|&s| &unit * s).collect();
    let curve = SampledCurve::new(params, points).unwrap();
    curve.check_causal(&field).unwrap();
    assert!(curve.bilipschitz_defect(2.0) <= 1.0);
    let _ = lorentzian_length(&curve, &field).unwrap();
}
