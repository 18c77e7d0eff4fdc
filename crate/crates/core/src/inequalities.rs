//! Quantitative inequality checkers and samplers.
//!
//! The central estimate is the quantitative reverse triangle inequality in
//! Minkowski space: for future-causal `u, v`,
//! `|u+v|² >= |u+v|(|u| + |v|) + A·D²` with `A = 1/10`, where `D` is the
//! Euclidean distance from `u` (equivalently `v`) to the line spanned by
//! `u + v`. Its curve-level corollary bounds the gap between the Lorentzian
//! length of a timelike curve and its chord from below by `A·D²/|w|`.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{minkowski_norm, minkowski_product, BilinearForm};
use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::maximality;
use crate::rng;
use crate::tolerances;

/// Slack of the quantitative reverse triangle inequality at `A = 1/10`,
/// together with the Euclidean distance `D` from `u` to the line spanned by
/// `u + v`.
///
/// Both vectors must lie in the open future cone (`v_t > 0`, `<v,v> >= 0`).
pub fn quantitative_triangle_slack(u: &DVector<f64>, v: &DVector<f64>) -> Result<(f64, f64)> {
    for w in [u, v] {
        let q = minkowski_product(w, w);
        if w[0] <= 0.0 || q < 0.0 {
            return Err(Error::NotFutureCausal { vt: w[0], q });
        }
    }
    let sum = u + v;
    let d = distance_to_span(u, &sum);
    let norm_sum = minkowski_norm(&sum);
    let slack = minkowski_product(&sum, &sum)
        - norm_sum * (minkowski_norm(u) + minkowski_norm(v))
        - 0.1 * d * d;
    Ok((slack, d))
}

/// Euclidean distance from `p` to the line through the origin spanned by
/// `dir`.
fn distance_to_span(p: &DVector<f64>, dir: &DVector<f64>) -> f64 {
    let n2 = dir.norm_squared();
    if n2 <= 1e-300 {
        return p.norm();
    }
    (p - dir * (p.dot(dir) / n2)).norm()
}

/// Monte Carlo sweep report.
#[derive(Debug, Clone, Serialize)]
pub struct InequalitySweepReport {
    pub trials: usize,
    pub violations: usize,
    pub min_slack: f64,
    /// Pair achieving the minimal slack.
    pub argmin_witness: (Vec<f64>, Vec<f64>),
    /// Minimal observed ratio `(|u+v|² − |u+v|(|u|+|v|)) / D²` over pairs
    /// with `D > 1e-6`; an upper bound for the sharp constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_best_constant: Option<f64>,
}

/// Sample a future-causal vector: `v_t` uniform in `(0, 1]`, spatial
/// direction uniform on the sphere, spatial radius uniform in `[0, v_t]`.
fn sample_causal(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    let vt: f64 = 1.0 - rng.random_range(0.0..1.0);
    let radius = rng.random_range(0.0..=1.0) * vt;
    let mut v = DVector::zeros(n);
    v[0] = vt;
    if n == 2 {
        let sign = if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
        v[1] = sign * radius;
    } else {
        let dir = rng::unit_vector(rng, n - 1);
        for i in 1..n {
            v[i] = radius * dir[i - 1];
        }
    }
    v
}

/// Sweep the quantitative triangle inequality over random causal pairs in
/// dimension `n`. The sweep is split into fixed chunks with independent
/// sub-seeds, so the result does not depend on the number of worker threads.
pub fn triangle_sweep(n: usize, trials: usize, seed: u64) -> InequalitySweepReport {
    assert!(n >= 2);
    let chunks: usize = 64;
    let per_chunk = trials / chunks;
    let remainder = trials % chunks;

    struct ChunkResult {
        violations: usize,
        min_slack: f64,
        witness: (Vec<f64>, Vec<f64>),
        best_constant: Option<f64>,
    }

    let results: Vec<ChunkResult> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::chunk_stream(seed, "triangle-sweep", c as u64);
            let count = per_chunk + if c == chunks - 1 { remainder } else { 0 };
            let mut violations = 0usize;
            let mut min_slack = f64::INFINITY;
            let mut witness = (Vec::new(), Vec::new());
            let mut best_constant: Option<f64> = None;
            for _ in 0..count {
                let u = sample_causal(&mut rng, n);
                let v = sample_causal(&mut rng, n);
                let (slack, d) = quantitative_triangle_slack(&u, &v)
                    .expect("sampled vectors are future-causal");
                let scale = 1.0 + u.norm_squared() + v.norm_squared();
                if slack < -tolerances::SWEEP_VIOLATION_BASE * scale {
                    violations += 1;
                }
                if slack < min_slack {
                    min_slack = slack;
                    witness = (u.iter().copied().collect(), v.iter().copied().collect());
                }
                if d > 1e-6 {
                    let sum = &u + &v;
                    let norm_sum = minkowski_norm(&sum);
                    let ratio = (minkowski_product(&sum, &sum)
                        - norm_sum * (minkowski_norm(&u) + minkowski_norm(&v)))
                        / (d * d);
                    best_constant = Some(best_constant.map_or(ratio, |b: f64| b.min(ratio)));
                }
            }
            ChunkResult {
                violations,
                min_slack,
                witness,
                best_constant,
            }
        })
        .collect();

    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let mut witness = (Vec::new(), Vec::new());
    let mut best_constant: Option<f64> = None;
    for r in results {
        violations += r.violations;
        if r.min_slack < min_slack {
            min_slack = r.min_slack;
            witness = r.witness;
        }
        best_constant = match (best_constant, r.best_constant) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    InequalitySweepReport {
        trials,
        violations,
        min_slack,
        argmin_witness: witness,
        empirical_best_constant: best_constant,
    }
}

/// Reverse-triangle constant for an arbitrary constant Lorentzian form.
///
/// Diagonalizing `λ = TᵀηT` maps the problem to the standard product while
/// distorting Euclidean distances by at most the extreme singular values of
/// `T = diag(√|d|)Qᵀ`; the distance enters squared, so the sound constant is
/// `A(λ) = min|eigenvalue(λ)| / 10`.
pub fn reverse_triangle_constant(lambda: &BilinearForm) -> f64 {
    let min_abs = lambda
        .eigenvalues()
        .iter()
        .map(|e| e.abs())
        .fold(f64::INFINITY, f64::min);
    0.1 * min_abs
}

/// Chord-versus-curve gap of a timelike polygonal curve under a constant
/// Lorentzian form: returns `(gap, bound)` with
/// `gap = |w|_λ − ℒ_λ(curve)` and `bound = A(λ)·D²/|w|_λ`, `D` the maximal
/// Euclidean distance from the curve to the line through its endpoints.
pub fn chord_length_gap(curve: &SampledCurve, lambda: &BilinearForm) -> Result<(f64, f64)> {
    let m = curve.len() - 1;
    let mut length = 0.0;
    for i in 0..m {
        let slope = curve.segment_slope(i);
        let q = lambda.apply(&slope, &slope)?;
        if q <= 0.0 {
            return Err(Error::NotCausal {
                segment: i,
                value: q,
            });
        }
        length += q.sqrt() * (curve.params()[i + 1] - curve.params()[i]);
    }
    let start = curve.point(0);
    let end = curve.point(m);
    let w = end - start;
    let norm_w = lambda.apply(&w, &w)?.max(0.0).sqrt();
    let dir_n2 = w.norm_squared();
    let d = curve
        .points()
        .iter()
        .map(|p| {
            let rel = p - start;
            if dir_n2 <= 1e-300 {
                rel.norm()
            } else {
                (&rel - &w * (rel.dot(&w) / dir_n2)).norm()
            }
        })
        .fold(0.0f64, f64::max);
    let gap = norm_w - length;
    let bound = if norm_w <= 1e-300 {
        0.0
    } else {
        reverse_triangle_constant(lambda) * d * d / norm_w
    };
    Ok((gap, bound))
}

/// Report of the two-metric length comparison.
#[derive(Debug, Clone, Serialize)]
pub struct LengthComparisonReport {
    pub length_1: f64,
    pub length_2: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Compare the Lorentzian lengths of one short arclength-parametrized curve
/// under two metrics: `|ℒ₁ − ℒ₂| <= δ·√ε` where
/// `ε >= sup |g₁(v,v) − g₂(v,v)|` over chart points and unit vectors,
/// estimated by sampling and inflated by 5%.
pub fn length_comparison_check(
    curve: &SampledCurve,
    g1: &MetricField,
    g2: &MetricField,
    samples: usize,
    seed: u64,
) -> Result<LengthComparisonReport> {
    if curve.arclength_defect() > 0.1 {
        return Err(Error::InvalidParameter(
            "curve must be parametrized by Euclidean arclength".into(),
        ));
    }
    curve.check_causal(g1)?;
    curve.check_causal(g2)?;

    let n = g1.dim();
    let radius = g1.domain_radius().min(g2.domain_radius());
    let mut rng = rng::stream(seed, "length-comparison-eps");
    let mut eps: f64 = 0.0;
    for _ in 0..samples {
        let x = rng::ball_point(&mut rng, n, radius);
        let v = rng::unit_vector(&mut rng, n);
        eps = eps.max((g1.eval_quadratic(&x, &v) - g2.eval_quadratic(&x, &v)).abs());
    }
    eps *= 1.05;

    let length_1 = maximality::lorentzian_length(curve, g1)?;
    let length_2 = maximality::lorentzian_length(curve, g2)?;
    let (a, b) = curve.param_range();
    let delta = b - a;
    let bound = delta * eps.sqrt() + 1e-9;
    Ok(LengthComparisonReport {
        length_1,
        length_2,
        epsilon: eps,
        delta,
        bound,
        passed: (length_1 - length_2).abs() <= bound,
    })
}

/// Report of the velocity lower bound check.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityLowerBoundReport {
    /// Chart constant `K = C·r_max/(e^{C·r_max} − 1)`.
    pub k: f64,
    pub c: f64,
    pub r_max: f64,
    pub length: f64,
    pub euclidean_length: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub bound: f64,
    /// True when the curve was handled by the `ℒ = 0` branch (everywhere
    /// lightlike).
    pub lightlike_branch: bool,
    pub passed: bool,
}

/// Speeds below this count as lightlike in the `ℒ = 0` branch.
pub const NULL_SPEED_TOL: f64 = 1e-8;

/// Verify the velocity lower bound `|γ'(t)|_g >= K·ℒ(γ)/r` for an
/// arclength-parametrized maximal curve, with
/// `K = C·r_max/(e^{C·r_max} − 1)` built from the chart constant `c`
/// (the bound on `||γ''||/||γ'||²`) and the chart's causal Euclidean length
/// bound `r_max = 4·domain_radius`. A curve of zero Lorentzian length is
/// checked to be everywhere lightlike instead.
pub fn velocity_lower_bound_check(
    curve: &SampledCurve,
    field: &MetricField,
    c: f64,
) -> Result<VelocityLowerBoundReport> {
    let r_max = 4.0 * field.domain_radius();
    let k = if c * r_max < 1e-14 {
        1.0
    } else {
        c * r_max / ((c * r_max).exp() - 1.0)
    };
    let length = maximality::lorentzian_length(curve, field)?;
    let r = curve.euclidean_length();

    let mut min_speed = f64::INFINITY;
    let mut max_speed: f64 = 0.0;
    for i in 0..curve.len() {
        let speed = field.norm_at(curve.point(i), &curve.velocity(i));
        min_speed = min_speed.min(speed);
        max_speed = max_speed.max(speed);
    }

    if length <= 1e-8 * r {
        return Ok(VelocityLowerBoundReport {
            k,
            c,
            r_max,
            length,
            euclidean_length: r,
            min_speed,
            max_speed,
            bound: 0.0,
            lightlike_branch: true,
            passed: max_speed <= NULL_SPEED_TOL,
        });
    }

    let bound = k * length / r;
    let tol = 1e-9 * (1.0 + bound);
    Ok(VelocityLowerBoundReport {
        k,
        c,
        r_max,
        length,
        euclidean_length: r,
        min_speed,
        max_speed,
        bound,
        lightlike_branch: false,
        passed: min_speed >= bound - tol,
    })
}
